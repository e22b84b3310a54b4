"""Scene container and its binary file format.

Layout (little-endian): magic ``FOBJ``, u32 version, u32 n_points,
u32 feat_dim (0 when absent), n*3 f32 xyz, n*3 u8 rgb, n*feat_dim f32
features, n i32 instance ids. An optional UTF-8 ``key=value`` sidecar
(``<path>.meta``) carries scene_id and provenance.

Colors live in [0, 1] but are stored as u8, so they snap to the 1/255 grid
on save; generators in this repo emit colors already on that grid, which
makes save/load round trips bit-exact.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"FOBJ"
VERSION = 1


class SceneFormatError(ValueError):
    """Raised for malformed scene files (bad magic, version, truncation)."""


@dataclass
class Scene:
    points: np.ndarray        # (n, 3) float32, meters
    colors: np.ndarray        # (n, 3) float32 in [0, 1]
    gt_instances: np.ndarray  # (n,) int32, -1 = background
    semantic_features: np.ndarray | None = None  # (n, d) float32
    scene_id: str = ""
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float32).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.float32).reshape(-1, 3)
        self.gt_instances = np.asarray(self.gt_instances, dtype=np.int32).reshape(-1)
        if self.semantic_features is not None:
            self.semantic_features = np.asarray(self.semantic_features, dtype=np.float32)
            self.semantic_features = self.semantic_features.reshape(len(self.points), -1)
        n = len(self.points)
        if len(self.colors) != n or len(self.gt_instances) != n:
            raise ValueError("per-point arrays have unequal lengths")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("non-finite coordinates")
        if n and self.gt_instances.min() < -1:
            raise ValueError("instance ids must be >= -1")

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def feat_dim(self) -> int:
        return 0 if self.semantic_features is None else self.semantic_features.shape[1]


def save_scene(scene: Scene, path: str) -> None:
    d = scene.feat_dim
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", VERSION, scene.n_points, d))
        f.write(scene.points.astype("<f4").tobytes())
        rgb = np.clip(np.round(scene.colors * 255.0), 0, 255).astype(np.uint8)
        f.write(rgb.tobytes())
        if d:
            f.write(scene.semantic_features.astype("<f4").tobytes())
        f.write(scene.gt_instances.astype("<i4").tobytes())
    meta = {"scene_id": scene.scene_id, **scene.provenance}
    with open(path + ".meta", "w", encoding="utf-8") as f:
        for k, v in meta.items():
            f.write(f"{k}={v}\n")


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise SceneFormatError(f"truncated scene file: short read in {what}")
    return buf


def load_scene(path: str) -> Scene:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise SceneFormatError("bad magic")
        version, n, d = struct.unpack("<III", _read_exact(f, 12, "header"))
        if version != VERSION:
            raise SceneFormatError(f"unsupported version {version}")
        pts = np.frombuffer(_read_exact(f, 12 * n, "xyz"), dtype="<f4").reshape(n, 3)
        rgb = np.frombuffer(_read_exact(f, 3 * n, "rgb"), dtype=np.uint8).reshape(n, 3)
        feats = None
        if d:
            feats = np.frombuffer(_read_exact(f, 4 * n * d, "features"), dtype="<f4")
            feats = feats.reshape(n, d)
        inst = np.frombuffer(_read_exact(f, 4 * n, "instances"), dtype="<i4")
    meta = read_sidecar(path + ".meta")
    scene_id = meta.pop("scene_id", os.path.splitext(os.path.basename(path))[0])
    return Scene(
        points=pts.copy(),
        colors=(rgb.astype(np.float32) / 255.0),
        gt_instances=inst.copy(),
        semantic_features=None if feats is None else feats.copy(),
        scene_id=scene_id,
        provenance=meta,
    )


def read_sidecar(path: str) -> dict:
    if not os.path.exists(path):
        return {}
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


# Distinct colors for mask visualization; index 0 is reserved for "no mask".
_PALETTE = np.array(
    [[180, 180, 180]]
    + [
        [int(127 + 120 * np.sin(0.9 * i + p)) for p in (0.0, 2.1, 4.2)]
        for i in range(1, 64)
    ],
    dtype=np.uint8,
)


def export_ply(scene: Scene, mask_ids: np.ndarray, path: str) -> None:
    """ASCII PLY with per-point color keyed by predicted mask id (-1 = none)."""
    mask_ids = np.asarray(mask_ids, dtype=np.int64).reshape(-1)
    if len(mask_ids) != scene.n_points:
        raise ValueError("mask id array length mismatch")
    colors = _PALETTE[(mask_ids + 1) % len(_PALETTE)]
    with open(path, "w", encoding="ascii") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {scene.n_points}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        f.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        f.write("end_header\n")
        for p, c in zip(scene.points, colors):
            f.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {c[0]} {c[1]} {c[2]}\n")
