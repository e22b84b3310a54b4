"""featbridge command line: frames + points -> engine scene file.

Frames live in a directory of ``.npz`` files, each holding ``rgb`` (H,W,3),
``depth`` (H,W, meters), ``K`` (3,3) and ``pose`` (4,4 camera-to-world).
Points come from an existing engine scene file (its feature block is
replaced) or a ``.npy`` array of xyz coordinates.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

import numpy as np

from .backbones import get_backbone
from .projection import DEFAULT_DEPTH_TOL, Frame, project_features
from .sceneformat import read_scene, write_scene_with_features


def load_frames(directory: str) -> list[Frame]:
    names = sorted(n for n in os.listdir(directory) if n.endswith(".npz"))
    if not names:
        raise FileNotFoundError(f"no .npz frames in {directory}")
    frames = []
    for name in names:
        with np.load(os.path.join(directory, name)) as z:
            frames.append(Frame(rgb=z["rgb"], depth=z["depth"],
                                intrinsics=z["K"], pose=z["pose"]))
    return frames


def load_points(path: str):
    if path.endswith(".npy"):
        pts = np.load(path).reshape(-1, 3)
        rgb = np.full((len(pts), 3), 128, dtype=np.uint8)
        inst = np.full(len(pts), -1, dtype=np.int32)
        return pts, rgb, inst
    pts, rgb, _, inst = read_scene(path)
    return pts, rgb, inst


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="featbridge")
    ap.add_argument("--frames", required=True)
    ap.add_argument("--points", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--backbone", default="color")
    ap.add_argument("--depth-tol", type=float, default=DEFAULT_DEPTH_TOL)
    ap.add_argument("--scene-id", default="")
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        frames = load_frames(args.frames)
        points, rgb, inst = load_points(args.points)
        backbone = get_backbone(args.backbone)
        feats, covered = project_features(points, frames, backbone,
                                          depth_tol=args.depth_tol)
        # atomic write: the engine should never see a partial file
        d = os.path.dirname(os.path.abspath(args.out)) or "."
        fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
        os.close(fd)
        write_scene_with_features(points, rgb, feats, inst, tmp,
                                  scene_id=args.scene_id)
        os.replace(tmp, args.out)
        if os.path.exists(tmp + ".meta"):
            os.replace(tmp + ".meta", args.out + ".meta")
        print(f"wrote {args.out}: {len(points)} points, "
              f"{covered.sum()} covered, feat_dim={feats.shape[1]}")
        return 0
    except (FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
