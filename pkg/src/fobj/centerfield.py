"""Learned center-field regressor and its training-sample synthesis.

Training samples are partial multi-view observations of synthetic objects:
the object is normalized into a unit cube, floor and wall planes are appended,
12 virtual depth views are taken from cameras 2 units from the origin with
pitch in [-30, +30] degrees, and 2-4 views are fused into the input cloud.
Object points are supervised with offsets to the full object centroid, plane
points with zero vectors. 70% of samples get extra objects mixed in.

The regressor is a pointwise network with a global max-pooled context vector;
it consumes candidate-normalized coordinates and predicts per-point offsets.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .geomreward import CenterField, normalize_candidate
from .tensorkit import Adam, Tensor, concat, param

CAMERA_DISTANCE = 2.0
PITCH_RANGE_DEG = 30.0
N_RENDER_VIEWS = 12
VIEW_CHOICES = (2, 3, 4)
MULTI_OBJECT_PROB = 0.7
RENDER_RES = 64
RENDER_FOV_DEG = 60.0

CKPT_MAGIC = b"FOBC"
CKPT_VERSION = 1


@dataclass
class CenterSample:
    points: np.ndarray       # (m, 3) fused partial observation
    targets: np.ndarray      # (m, 3) offsets; zero for plane points
    n_views: int
    cameras: np.ndarray      # (n_views, 3) camera positions used
    pitches_deg: np.ndarray  # (n_views,)
    multi_object: bool


def _plane_points(rng, axis: int, level: float, half: float, density_n: int):
    """Axis-aligned square plane sampled with `density_n` points."""
    pts = rng.uniform(-half, half, size=(density_n, 3))
    pts[:, axis] = level
    return pts


def _camera_pose(yaw: float, pitch: float):
    """Camera position at CAMERA_DISTANCE from origin, looking at the origin."""
    cp, sp = np.cos(pitch), np.sin(pitch)
    pos = CAMERA_DISTANCE * np.array([cp * np.cos(yaw), cp * np.sin(yaw), sp])
    fwd = -pos / np.linalg.norm(pos)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(fwd, up)
    nr = np.linalg.norm(right)
    if nr < 1e-9:  # looking straight down/up
        right = np.array([1.0, 0.0, 0.0])
        nr = 1.0
    right = right / nr
    true_up = np.cross(right, fwd)
    return pos, np.stack([right, true_up, fwd])  # rows: camera axes


def visible_indices(points: np.ndarray, cam_pos: np.ndarray, cam_rot: np.ndarray,
                    res: int = RENDER_RES, fov_deg: float = RENDER_FOV_DEG) -> np.ndarray:
    """Depth-buffer visibility on sampled points: project into a virtual
    pinhole view and keep the nearest point per pixel."""
    rel = (points - cam_pos) @ cam_rot.T
    z = rel[:, 2]
    valid = z > 1e-6
    f = 0.5 * res / np.tan(np.deg2rad(fov_deg) / 2.0)
    u = np.full(len(points), -1, dtype=np.int64)
    v = np.full(len(points), -1, dtype=np.int64)
    u[valid] = np.floor(f * rel[valid, 0] / z[valid] + res / 2).astype(np.int64)
    v[valid] = np.floor(f * rel[valid, 1] / z[valid] + res / 2).astype(np.int64)
    inside = valid & (u >= 0) & (u < res) & (v >= 0) & (v < res)
    best = {}
    for i in np.nonzero(inside)[0]:
        key = (u[i], v[i])
        if key not in best or z[i] < z[best[key]]:
            best[key] = i
    return np.array(sorted(best.values()), dtype=np.int64)


def make_center_training_sample(objects: list[np.ndarray],
                                rng: np.random.Generator,
                                plane_points: int = 400) -> CenterSample:
    """One Appendix-style partial observation with per-point offset targets."""
    if not objects:
        raise ValueError("need at least one object shape")

    def normalized(obj):
        obj = np.asarray(obj, dtype=np.float64)
        c = obj.mean(axis=0)
        ext = (obj.max(axis=0) - obj.min(axis=0)).max()
        return (obj - c) / (ext if ext > 0 else 1.0)

    placed = [normalized(objects[rng.integers(len(objects))])]
    multi = bool(rng.random() < MULTI_OBJECT_PROB)
    if multi:
        for _ in range(int(rng.integers(1, 3))):
            extra = normalized(objects[rng.integers(len(objects))])
            shift = rng.uniform(-0.9, 0.9, size=3)
            shift[2] = 0.0
            placed.append(extra * rng.uniform(0.5, 1.0) + shift)

    floor_level = min(p[:, 2].min() for p in placed)
    clouds = list(placed)
    owners = list(range(len(placed)))
    clouds.append(_plane_points(rng, axis=2, level=floor_level, half=1.5,
                                density_n=plane_points))
    owners.append(-1)
    wall_y = max(p[:, 1].max() for p in placed) + 0.25
    clouds.append(_plane_points(rng, axis=1, level=wall_y, half=1.5,
                                density_n=plane_points))
    owners.append(-1)

    all_pts = np.concatenate(clouds, axis=0)
    owner_of = np.concatenate([np.full(len(c), o) for c, o in zip(clouds, owners)])
    centroids = {i: placed[i].mean(axis=0) for i in range(len(placed))}

    pitches = np.deg2rad(rng.uniform(-PITCH_RANGE_DEG, PITCH_RANGE_DEG,
                                     size=N_RENDER_VIEWS))
    yaws = rng.uniform(0.0, 2.0 * np.pi, size=N_RENDER_VIEWS)
    n_views = int(rng.choice(VIEW_CHOICES))
    chosen = rng.choice(N_RENDER_VIEWS, size=n_views, replace=False)

    parts, cams = [], []
    for vi in chosen:
        pos, rot = _camera_pose(yaws[vi], pitches[vi])
        parts.append(visible_indices(all_pts, pos, rot))
        cams.append(pos)
    idx = np.concatenate(parts)
    pts = all_pts[idx]
    own = owner_of[idx]
    targets = np.zeros_like(pts)
    for i, c in centroids.items():
        targets[own == i] = c - pts[own == i]
    return CenterSample(points=pts, targets=targets, n_views=n_views,
                        cameras=np.array(cams),
                        pitches_deg=np.rad2deg(pitches[chosen]),
                        multi_object=multi)


# ---- learned regressor ----

@dataclass
class CenterRegressorParams:
    weights: list  # [W1,b1,W2,b2,W3,b3]
    hidden_dim: int
    normalize_inputs: bool = True

    def tensors(self):
        return self.weights

    def astype(self, dtype):
        return CenterRegressorParams(
            weights=[param(w.data.astype(dtype)) for w in self.weights],
            hidden_dim=self.hidden_dim, normalize_inputs=self.normalize_inputs)


def init_center_regressor(rng: np.random.Generator, hidden_dim: int = 128,
                          dtype=np.float32) -> CenterRegressorParams:
    def lin(a, b):
        scale = np.sqrt(2.0 / (a + b))
        return [param((rng.standard_normal((a, b)) * scale).astype(dtype)),
                param(np.zeros(b, dtype=dtype))]

    weights = (lin(3, hidden_dim)
               + lin(2 * hidden_dim, hidden_dim)
               + lin(hidden_dim, 3))
    return CenterRegressorParams(weights=weights, hidden_dim=hidden_dim)


def regressor_forward(pts: Tensor, params: CenterRegressorParams) -> Tensor:
    """(n, 3) normalized coordinates -> (n, 3) predicted offsets."""
    w1, b1, w2, b2, w3, b3 = params.weights
    h = (pts @ w1 + b1).tanh()
    ctx = h.max(axis=0, keepdims=True)                  # global shape context
    n = pts.shape[0]
    ctx_rows = Tensor(np.ones((n, 1), dtype=h.dtype)) @ ctx
    g = (concat([h, ctx_rows], axis=1) @ w2 + b2).tanh()
    return g @ w3 + b3


def predict_center_field(points: np.ndarray,
                         params: CenterRegressorParams) -> CenterField:
    """Offsets in the caller's coordinate frame (un-normalized on the way out)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if params.normalize_inputs:
        norm_pts, _, scale = normalize_candidate(points)
    else:
        norm_pts, scale = points, 1.0
    dtype = params.weights[0].dtype
    pred = regressor_forward(Tensor(norm_pts.astype(dtype)), params)
    return CenterField(offsets=pred.data.astype(np.float64) * scale)


def mse_loss(params: CenterRegressorParams, points: np.ndarray,
             targets: np.ndarray) -> Tensor:
    dtype = params.weights[0].dtype
    pred = regressor_forward(Tensor(np.asarray(points, dtype=dtype)), params)
    diff = pred - Tensor(np.asarray(targets, dtype=dtype))
    return (diff * diff).mean()


def train_center_regressor(samples: list[CenterSample],
                           params: CenterRegressorParams,
                           epochs: int, lr: float = 1e-3):
    """Minimize mean squared offset error; returns (params, loss_curve)."""
    if not samples:
        raise ValueError("need at least one training sample")
    opt = Adam(params.tensors(), lr=lr)
    curve = []
    for _ in range(epochs):
        total = 0.0
        for s in samples:
            opt.zero_grad()
            loss = mse_loss(params, s.points, s.targets)
            val = loss.item()
            if not np.isfinite(val):
                raise FloatingPointError(
                    f"non-finite training loss {val!r}; last curve={curve[-3:]}")
            loss.backward()
            opt.step()
            total += val
        curve.append(total / len(samples))
    return params, curve


def save_center_regressor(params: CenterRegressorParams, path: str) -> None:
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<III", CKPT_VERSION, params.hidden_dim,
                            int(params.normalize_inputs)))
        f.write(struct.pack("<I", len(params.weights)))
        for w in params.weights:
            shape = w.data.shape
            f.write(struct.pack("<I", len(shape)))
            f.write(struct.pack(f"<{len(shape)}I", *shape))
            f.write(w.data.astype("<f4").tobytes())


def load_center_regressor(path: str) -> CenterRegressorParams:
    with open(path, "rb") as f:
        if f.read(4) != CKPT_MAGIC:
            raise ValueError("bad magic")
        version, hidden, norm = struct.unpack("<III", f.read(12))
        if version != CKPT_VERSION:
            raise ValueError(f"unsupported version {version}")
        (n_arrays,) = struct.unpack("<I", f.read(4))
        weights = []
        for _ in range(n_arrays):
            (ndim,) = struct.unpack("<I", f.read(4))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
            data = np.frombuffer(f.read(4 * int(np.prod(shape))), dtype="<f4")
            weights.append(param(data.reshape(shape).copy()))
    return CenterRegressorParams(weights=weights, hidden_dim=hidden,
                                 normalize_inputs=bool(norm))
