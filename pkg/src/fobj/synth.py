"""Deterministic synthetic scenes, semantic features, and center-field data.

Scenes are a floor plus two walls (background, instance -1) and a handful of
primitive objects (box, cylinder, table = top + 4 legs, chair = seat + back +
4 legs) surface-sampled at a fixed density with Gaussian position noise.
Background colors use a coarse random patch pattern so the graph segmentation
splits large planes into many superpoints; each object gets a uniform color.

Semantic features emulate projected foundation-model features: a fixed unit
embedding per class, a small per-instance perturbation, and per-point noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .centerfield import CenterSample, make_center_training_sample
from .sceneio import Scene

ARCHETYPES = ("box", "cylinder", "table", "chair")


@dataclass
class SceneSpec:
    room: tuple = (4.0, 4.0, 2.2)          # extents in meters
    n_objects: tuple = (4, 6)              # inclusive count range
    archetypes: tuple = ARCHETYPES
    contact: bool = False                  # put one object flush to a wall
    clutter: bool = False                  # allow tighter packing
    density: float = 600.0                 # points per square meter
    noise_sigma: float = 0.004             # meters
    background_patch: float = 0.45         # color patch size; 0 = uniform
    seed: int = 0

    def __post_init__(self):
        if min(self.room) <= 0 or self.density <= 0:
            raise ValueError("room extents and density must be positive")

    def to_dict(self) -> dict:
        return {"room": list(self.room), "n_objects": list(self.n_objects),
                "archetypes": list(self.archetypes), "contact": self.contact,
                "clutter": self.clutter, "density": self.density,
                "noise_sigma": self.noise_sigma,
                "background_patch": self.background_patch, "seed": self.seed}


@dataclass
class FeatureSpec:
    dim: int = 16
    embedding_seed: int = 7
    instance_sigma: float = 0.05   # class -> instance perturbation
    point_sigma: float = 0.02      # instance -> point noise
    # scale of the shared direction mixed into every class embedding; at 0
    # the classes are near-orthogonal, larger values move all features into
    # a positive-similarity cone
    common_scale: float = 2.0
    # smooth positional drift of background features (projected features on
    # large surfaces vary with location/context); 0 disables
    background_drift: float = 0.5
    drift_wavelength: float = 1.5  # meters
    # independent embedding per background grid cell of this size (meters);
    # 0 keeps one shared background embedding. Visually mottled clutter maps
    # to mutually unrelated features, which leaves junk masks without
    # affinity support.
    background_cell: float = 0.0
    # orthogonal mode: background cells take exact basis vectors outside a
    # reserved object subspace, so background-background and object-
    # background similarities clamp to zero and only genuine object merges
    # carry affinity support
    orthogonal_background: bool = False
    object_subspace: int = 8
    # zero mode: background points carry exact zero vectors (no objectness
    # support at all); point noise is then applied to object points only so
    # the zeros stay exact
    background_zero: bool = False

    def __post_init__(self):
        if self.dim < 2 or self.instance_sigma < 0 or self.point_sigma < 0:
            raise ValueError("invalid feature spec")
        if self.orthogonal_background and not (0 < self.object_subspace < self.dim):
            raise ValueError("object_subspace must be inside the feature dim")
        if self.orthogonal_background and self.background_cell <= 0:
            raise ValueError("orthogonal background requires a cell size")


# ---- surface samplers ----

def _n_for(area: float, density: float) -> int:
    return max(1, int(round(area * density)))


def sample_box_surface(rng, size, density: float,
                       drop_bottom: bool = False) -> np.ndarray:
    sx, sy, sz = size
    faces = []
    for axis, extent in ((0, sy * sz), (1, sx * sz), (2, sx * sy)):
        for side in (0.0, 1.0):
            if drop_bottom and axis == 2 and side == 0.0:
                continue  # undersides are never observed by a scanner
            n = _n_for(extent, density / 2.0)  # density split across the pair
            p = rng.uniform(0.0, 1.0, size=(n, 3))
            p[:, axis] = side
            faces.append(p)
    pts = np.concatenate(faces, axis=0) * np.array(size)
    return pts - np.array(size) / 2.0


def sample_cylinder_surface(rng, radius: float, height: float,
                            density: float,
                            drop_bottom: bool = False) -> np.ndarray:
    side_n = _n_for(2 * np.pi * radius * height, density)
    theta = rng.uniform(0, 2 * np.pi, side_n)
    z = rng.uniform(-height / 2, height / 2, side_n)
    side = np.stack([radius * np.cos(theta), radius * np.sin(theta), z], axis=1)
    caps = []
    cap_levels = (height / 2,) if drop_bottom else (-height / 2, height / 2)
    for zc in cap_levels:
        n = _n_for(np.pi * radius ** 2, density)
        r = radius * np.sqrt(rng.uniform(0, 1, n))
        t = rng.uniform(0, 2 * np.pi, n)
        caps.append(np.stack([r * np.cos(t), r * np.sin(t), np.full(n, zc)],
                             axis=1))
    return np.concatenate([side] + caps, axis=0)


def _legs(rng, w, depth, leg_h, leg_t, density):
    legs = []
    for lx in (-w / 2 + leg_t, w / 2 - leg_t):
        for ly in (-depth / 2 + leg_t, depth / 2 - leg_t):
            leg = sample_box_surface(rng, (leg_t, leg_t, leg_h), density,
                                     drop_bottom=True)
            leg += np.array([lx, ly, leg_h / 2])
            legs.append(leg)
    return legs


def sample_table_surface(rng, density: float) -> np.ndarray:
    w = rng.uniform(0.6, 0.9)
    depth = rng.uniform(0.6, 0.9)
    h = rng.uniform(0.45, 0.6)
    top = sample_box_surface(rng, (w, depth, 0.05), density) + np.array([0, 0, h])
    return np.concatenate([top] + _legs(rng, w, depth, h, 0.03, density), axis=0)


def sample_chair_surface(rng, density: float) -> np.ndarray:
    s = rng.uniform(0.38, 0.5)
    seat_h = rng.uniform(0.3, 0.42)
    seat = sample_box_surface(rng, (s, s, 0.05), density) + np.array([0, 0, seat_h])
    back = sample_box_surface(rng, (s, 0.05, s), density)
    back += np.array([0, -s / 2 + 0.025, seat_h + s / 2])
    return np.concatenate([seat, back] + _legs(rng, s, s, seat_h, 0.03, density),
                          axis=0)


def sample_archetype(name: str, rng, density: float) -> np.ndarray:
    """Object surface cloud centered on the footprint, resting at z=0."""
    if name == "box":
        size = rng.uniform(0.3, 0.6, size=3)
        pts = (sample_box_surface(rng, size, density, drop_bottom=True)
               + np.array([0, 0, size[2] / 2]))
    elif name == "cylinder":
        r, h = rng.uniform(0.12, 0.25), rng.uniform(0.3, 0.7)
        pts = (sample_cylinder_surface(rng, r, h, density, drop_bottom=True)
               + np.array([0, 0, h / 2]))
    elif name == "table":
        pts = sample_table_surface(rng, density)
    elif name == "chair":
        pts = sample_chair_surface(rng, density)
    else:
        raise ValueError(f"unknown archetype {name!r}")
    return pts


def _patch_colors(rng, pts: np.ndarray, patch: float, base, jitter=0.25):
    """Coarse random color patches over a plane (quantized to the u8 grid)."""
    base = np.asarray(base)
    if patch <= 0:
        cols = np.tile(base, (len(pts), 1))
    else:
        cells = np.floor(pts[:, :2] / patch).astype(np.int64)
        uniq, inv = np.unique(cells, axis=0, return_inverse=True)
        cell_cols = np.clip(base + rng.uniform(-jitter, jitter, (len(uniq), 3)),
                            0.05, 0.95)
        cols = cell_cols[inv]
    return np.round(cols * 255.0) / np.float32(255.0)


def gen_scene(spec: SceneSpec, rng: np.random.Generator | None = None,
              scene_id: str = "") -> Scene:
    """One scene with ground-truth instance ids; deterministic given spec."""
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    rx, ry, rz = spec.room
    clouds, colors, inst = [], [], []

    floor_n = _n_for(rx * ry, spec.density)
    floor = np.column_stack([rng.uniform(0, rx, floor_n),
                             rng.uniform(0, ry, floor_n),
                             np.zeros(floor_n)])
    wall1_n = _n_for(rx * rz, spec.density)
    wall1 = np.column_stack([rng.uniform(0, rx, wall1_n),
                             np.zeros(wall1_n),
                             rng.uniform(0, rz, wall1_n)])
    wall2_n = _n_for(ry * rz, spec.density)
    wall2 = np.column_stack([np.zeros(wall2_n),
                             rng.uniform(0, ry, wall2_n),
                             rng.uniform(0, rz, wall2_n)])
    for plane in (floor, wall1, wall2):
        clouds.append(plane)
        colors.append(_patch_colors(rng, plane, spec.background_patch,
                                    base=(0.55, 0.55, 0.55)))
        inst.append(np.full(len(plane), -1, dtype=np.int32))

    n_objects = int(rng.integers(spec.n_objects[0], spec.n_objects[1] + 1))
    margin = 0.15 if spec.clutter else 0.35
    placed_boxes = []
    classes = []
    for oi in range(n_objects):
        for attempt in range(120):
            if attempt % 20 == 0:  # resample the shape when placement stalls
                name = spec.archetypes[int(rng.integers(len(spec.archetypes)))]
                pts = sample_archetype(name, rng, spec.density)
                yaw = rng.uniform(0, 2 * np.pi)
                c, s = np.cos(yaw), np.sin(yaw)
                pts = pts @ np.array([[c, s, 0.0], [-s, c, 0.0],
                                      [0.0, 0.0, 1.0]])
                half = (pts[:, :2].max(axis=0) - pts[:, :2].min(axis=0)) / 2.0
            if spec.contact and oi == 0:
                cx = rng.uniform(half[0] + 0.2, rx - half[0] - 0.2)
                cy = half[1] + 0.01  # flush against the y=0 wall
            else:
                cx = rng.uniform(half[0] + 0.25, rx - half[0] - 0.25)
                cy = rng.uniform(half[1] + 0.25, ry - half[1] - 0.25)
            box = (cx - half[0] - margin, cy - half[1] - margin,
                   cx + half[0] + margin, cy + half[1] + margin)
            if all(box[2] < b[0] or box[0] > b[2] or box[3] < b[1] or box[1] > b[3]
                   for b in placed_boxes):
                break
        else:
            raise RuntimeError(f"object placement failed after retries; spec={spec.to_dict()}")
        placed_boxes.append(box)
        classes.append(name)
        placed = pts + np.array([cx, cy, 0.0]) - np.array(
            [(pts[:, 0].max() + pts[:, 0].min()) / 2,
             (pts[:, 1].max() + pts[:, 1].min()) / 2, pts[:, 2].min()])
        clouds.append(placed)
        # saturated channels keep objects far from the gray background
        lo = rng.uniform(0.05, 0.30, 3)
        hi = rng.uniform(0.70, 0.95, 3)
        col = np.where(rng.random(3) < 0.5, lo, hi)
        col = np.round(col * 255) / np.float32(255.0)
        colors.append(np.tile(col, (len(placed), 1)))
        inst.append(np.full(len(placed), oi, dtype=np.int32))

    points = np.concatenate(clouds, axis=0)
    if spec.noise_sigma > 0:
        points = points + rng.normal(0.0, spec.noise_sigma, points.shape)
    return Scene(points=points.astype(np.float32),
                 colors=np.concatenate(colors, axis=0).astype(np.float32),
                 gt_instances=np.concatenate(inst),
                 scene_id=scene_id or f"synth-{spec.seed}",
                 provenance={"generator": "synth",
                             "object_classes": ",".join(classes),
                             "spec_seed": str(spec.seed)})


def scene_seed(master_seed: int, index: int) -> int:
    """Documented per-scene seed split: master XOR hash(index)."""
    return master_seed ^ hash(index)


def gen_scenes(spec: SceneSpec, n: int, master_seed: int) -> list[Scene]:
    out = []
    for i in range(n):
        si = scene_seed(master_seed, i)
        s = SceneSpec(**{**spec.to_dict(), "seed": si})
        s.room = tuple(s.room)
        s.n_objects = tuple(s.n_objects)
        s.archetypes = tuple(s.archetypes)
        out.append(gen_scene(s, scene_id=f"scene-{master_seed}-{i:03d}"))
    return out


# ---- semantic features ----

def _class_embedding(name: str, dim: int, embedding_seed: int,
                     common_scale: float = 0.0) -> np.ndarray:
    key = int.from_bytes(name.encode("utf-8"), "little") % (2 ** 31)
    e = np.random.default_rng([embedding_seed, key]).standard_normal(dim)
    if common_scale > 0:
        base = np.random.default_rng([embedding_seed]).standard_normal(dim)
        e = e + common_scale * base / np.linalg.norm(base)
    return e / np.linalg.norm(e)


def gen_semantic_features(scene: Scene, fspec: FeatureSpec,
                          rng: np.random.Generator) -> np.ndarray:
    """Per-point features: unit class embedding + instance perturbation
    (renormalized) + per-point noise. Background gets its own class plus a
    smooth positional drift so distant clutter is not perfectly coherent;
    in orthogonal mode background cells use exact basis vectors instead."""
    classes = scene.provenance.get("object_classes", "")
    class_of = classes.split(",") if classes else []
    n = scene.n_points
    feats = np.zeros((n, fspec.dim), dtype=np.float64)
    for inst in np.unique(scene.gt_instances):
        mask = scene.gt_instances == inst
        if inst == -1:
            cname = "background"
        elif inst < len(class_of):
            cname = class_of[inst]
        else:
            cname = f"object-{inst}"
        if fspec.orthogonal_background:
            emb = _subspace_class_embedding(cname, fspec)
        else:
            emb = _class_embedding(cname, fspec.dim, fspec.embedding_seed,
                                   fspec.common_scale)
        if inst != -1 and fspec.instance_sigma > 0:
            jitter = rng.normal(0.0, fspec.instance_sigma, fspec.dim)
            if fspec.orthogonal_background:
                jitter[: fspec.dim - fspec.object_subspace] = 0.0
            emb = emb + jitter
            emb = emb / np.linalg.norm(emb)
        if inst == -1 and fspec.background_zero:
            feats[mask] = 0.0
        elif inst == -1 and fspec.orthogonal_background:
            feats[mask] = _orthogonal_cell_embeddings(scene.points[mask], fspec)
        elif inst == -1 and fspec.background_cell > 0:
            feats[mask] = _background_cell_embeddings(scene.points[mask], fspec)
        elif inst == -1 and fspec.background_drift > 0:
            rows = _background_drift(scene.points[mask], fspec, rng)
            block = emb[None, :] + rows
            block /= np.linalg.norm(block, axis=1, keepdims=True)
            feats[mask] = block
        else:
            feats[mask] = emb
    if fspec.point_sigma > 0:
        noise = rng.normal(0.0, fspec.point_sigma, feats.shape)
        if fspec.background_zero:
            noise[scene.gt_instances == -1] = 0.0
        feats = feats + noise
    return feats.astype(np.float32)


def _subspace_class_embedding(name: str, fspec: FeatureSpec) -> np.ndarray:
    """Unit class embedding confined to the reserved object subspace."""
    lo = fspec.dim - fspec.object_subspace
    key = int.from_bytes(name.encode("utf-8"), "little") % (2 ** 31)
    part = np.random.default_rng([fspec.embedding_seed, 3, key]).standard_normal(
        fspec.object_subspace)
    emb = np.zeros(fspec.dim)
    emb[lo:] = part / np.linalg.norm(part)
    return emb


def _orthogonal_cell_embeddings(points: np.ndarray,
                                fspec: FeatureSpec) -> np.ndarray:
    """Each occupied background cell (keyed like the color patches, on the
    xy grid) gets one basis vector of the non-object dims; cells only repeat
    a vector when there are more cells than dims, and then far apart."""
    n_basis = fspec.dim - fspec.object_subspace
    cells = np.floor(points[:, :2].astype(np.float64)
                     / fspec.background_cell).astype(np.int64)
    uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
    embs = np.zeros((len(uniq), fspec.dim))
    for i in range(len(uniq)):
        embs[i, i % n_basis] = 1.0
    return embs[inverse]


def _background_cell_embeddings(points: np.ndarray,
                                fspec: FeatureSpec) -> np.ndarray:
    """One independent unit embedding per occupied background grid cell."""
    cells = np.floor(points.astype(np.float64) / fspec.background_cell)
    cells = cells.astype(np.int64)
    uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
    embs = np.zeros((len(uniq), fspec.dim))
    for i, c in enumerate(uniq):
        key = (int(c[0]) * 73856093 ^ int(c[1]) * 19349663
               ^ int(c[2]) * 83492791) % (2 ** 31)
        e = np.random.default_rng([fspec.embedding_seed, 7, key]).standard_normal(fspec.dim)
        embs[i] = e / np.linalg.norm(e)
    return embs[inverse]


def _background_drift(points: np.ndarray, fspec: FeatureSpec,
                      rng: np.random.Generator) -> np.ndarray:
    """Low-frequency sinusoidal feature field over xyz."""
    omega = (2 * np.pi / fspec.drift_wavelength)
    out = np.zeros((len(points), fspec.dim))
    for _ in range(3):
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        phase = rng.uniform(0, 2 * np.pi)
        target = rng.standard_normal(fspec.dim)
        target /= np.linalg.norm(target)
        wave = np.sin(omega * (points.astype(np.float64) @ direction) + phase)
        out += np.outer(wave, target)
    return out * (fspec.background_drift / np.sqrt(3.0))


def attach_semantic_features(scene: Scene, fspec: FeatureSpec,
                             seed: int = 0) -> Scene:
    rng = np.random.default_rng([seed, scene.n_points])
    scene.semantic_features = gen_semantic_features(scene, fspec, rng)
    return scene


# ---- center-field training data ----

def gen_center_training_set(n_samples: int, archetypes=ARCHETYPES,
                            rng: np.random.Generator | None = None,
                            surface_density: float = 900.0) -> list[CenterSample]:
    """Delegates to the per-sample synthesis with archetype surface clouds."""
    if n_samples < 1:
        raise ValueError("need n_samples >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    out = []
    for _ in range(n_samples):
        shapes = [sample_archetype(a, rng, surface_density) for a in archetypes]
        out.append(make_center_training_sample(shapes, rng))
    return out
