"""Writer/reader for the engine's binary scene format.

Layout (little-endian): magic ``FOBJ``, u32 version=1, u32 n_points,
u32 feat_dim, n*3 f32 xyz, n*3 u8 rgb, n*feat_dim f32 features, n i32
instance ids. This module is the adapter's side of the file contract; the
engine's own loader is the reference reader.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"FOBJ"
VERSION = 1


def write_scene_with_features(points, colors, features, instance_ids,
                              path: str, scene_id: str = "") -> None:
    points = np.asarray(points, dtype="<f4").reshape(-1, 3)
    n = len(points)
    colors = np.asarray(colors)
    if colors.dtype != np.uint8:
        colors = np.clip(np.round(np.asarray(colors, dtype=np.float64) * 255.0),
                         0, 255).astype(np.uint8)
    colors = colors.reshape(n, 3)
    instance_ids = np.asarray(instance_ids, dtype="<i4").reshape(n)
    if features is None:
        d = 0
    else:
        features = np.asarray(features, dtype="<f4").reshape(n, -1)
        d = features.shape[1]
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", VERSION, n, d))
        f.write(points.tobytes())
        f.write(colors.tobytes())
        if d:
            f.write(features.tobytes())
        f.write(instance_ids.tobytes())
    if scene_id:
        with open(path + ".meta", "w", encoding="utf-8") as f:
            f.write(f"scene_id={scene_id}\n")
            f.write("provenance=featbridge\n")


def read_scene(path: str):
    """Minimal reader used for self-checks; the engine's loader is the
    authoritative consumer."""
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError("bad magic")
        version, n, d = struct.unpack("<III", f.read(12))
        if version != VERSION:
            raise ValueError(f"unsupported version {version}")
        pts = np.frombuffer(f.read(12 * n), dtype="<f4").reshape(n, 3)
        rgb = np.frombuffer(f.read(3 * n), dtype=np.uint8).reshape(n, 3)
        feats = None
        if d:
            feats = np.frombuffer(f.read(4 * n * d), dtype="<f4").reshape(n, d)
        inst = np.frombuffer(f.read(4 * n), dtype="<i4")
    return pts, rgb, feats, inst
