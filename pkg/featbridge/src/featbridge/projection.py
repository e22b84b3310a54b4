"""Multi-view feature projection with a depth-agreement gate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_DEPTH_TOL = 0.05  # meters


@dataclass
class Frame:
    rgb: np.ndarray         # (H, W, 3) uint8 or float in [0,1]
    depth: np.ndarray       # (H, W) float meters, <=0 means no return
    intrinsics: np.ndarray  # (3, 3) pinhole K
    pose: np.ndarray        # (4, 4) camera-to-world

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        self.intrinsics = np.asarray(self.intrinsics, dtype=np.float64)
        self.pose = np.asarray(self.pose, dtype=np.float64)
        h, w = self.depth.shape
        if self.rgb.shape[:2] != (h, w):
            raise ValueError("rgb/depth shapes disagree")
        if self.intrinsics.shape != (3, 3) or self.pose.shape != (4, 4):
            raise ValueError("bad intrinsics/pose shape")
        if abs(np.linalg.det(self.pose)) < 1e-12:
            raise ValueError("pose is not invertible")


def project_points(points: np.ndarray, frame: Frame):
    """Pinhole projection of world points into the frame.

    Returns (u, v, z) as float pixel coordinates and camera-frame depth.
    """
    world_to_cam = np.linalg.inv(frame.pose)
    pts_h = np.concatenate([points, np.ones((len(points), 1))], axis=1)
    cam = (world_to_cam @ pts_h.T).T[:, :3]
    z = cam[:, 2]
    fx, fy = frame.intrinsics[0, 0], frame.intrinsics[1, 1]
    cx, cy = frame.intrinsics[0, 2], frame.intrinsics[1, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = fx * cam[:, 0] / z + cx
        v = fy * cam[:, 1] / z + cy
    return u, v, z


def bilinear_upsample(grid: np.ndarray, out_hw) -> np.ndarray:
    """(h, w, d) feature grid -> (H, W, d) by bilinear interpolation,
    treating samples as pixel centers."""
    h, w, d = grid.shape
    H, W = out_hw
    if (h, w) == (H, W):
        return grid
    ys = (np.arange(H) + 0.5) * h / H - 0.5
    xs = (np.arange(W) + 0.5) * w / W - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    top = grid[y0][:, x0] * (1 - wx) + grid[y0][:, x1] * wx
    bot = grid[y1][:, x0] * (1 - wx) + grid[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def project_features(points: np.ndarray, frames: list[Frame], backbone,
                     depth_tol: float = DEFAULT_DEPTH_TOL):
    """Average per-point features over all frames with depth agreement.

    Returns (features (n, d) float32, covered (n,) bool). Uncovered points
    get zero vectors.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not frames:
        raise ValueError("no frames")
    n = len(points)
    acc = None
    hits = np.zeros(n, dtype=np.int64)
    for frame in frames:
        fmap = np.asarray(backbone(frame.rgb), dtype=np.float64)
        if fmap.ndim != 3:
            raise ValueError("backbone must return an (h, w, d) feature map")
        H, W = frame.depth.shape
        fmap = bilinear_upsample(fmap, (H, W))
        if acc is None:
            acc = np.zeros((n, fmap.shape[2]))
        u, v, z = project_points(points, frame)
        ui = np.round(u).astype(np.int64)
        vi = np.round(v).astype(np.int64)
        valid = (z > 0) & (ui >= 0) & (ui < W) & (vi >= 0) & (vi < H)
        idx = np.nonzero(valid)[0]
        depth_at = frame.depth[vi[idx], ui[idx]]
        agree = (depth_at > 0) & (np.abs(z[idx] - depth_at) < depth_tol)
        idx = idx[agree]
        acc[idx] += fmap[vi[idx], ui[idx]]
        hits[idx] += 1
    covered = hits > 0
    feats = np.zeros_like(acc)
    feats[covered] = acc[covered] / hits[covered, None]
    return feats.astype(np.float32), covered
