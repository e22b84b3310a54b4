import os

import numpy as np

from featbridge.cli import main
from featbridge.sceneformat import read_scene, write_scene_with_features

from fixtures import three_point_fixture


def write_frames(directory, frames):
    os.makedirs(directory, exist_ok=True)
    for i, fr in enumerate(frames):
        np.savez(os.path.join(directory, f"frame_{i:03d}.npz"),
                 rgb=fr.rgb, depth=fr.depth, K=fr.intrinsics, pose=fr.pose)


def test_end_to_end(tmp_path):
    frame, points, colors, instance_ids = three_point_fixture()
    frames_dir = str(tmp_path / "frames")
    write_frames(frames_dir, [frame])
    pts_path = str(tmp_path / "in.fobj")
    write_scene_with_features(points, colors, None, instance_ids, pts_path)
    out = str(tmp_path / "out.fobj")
    rc = main(["--frames", frames_dir, "--points", pts_path, "--out", out,
               "--backbone", "color", "--scene-id", "cli-test"])
    assert rc == 0
    pts, rgb, feats, inst = read_scene(out)
    assert feats is not None and feats.shape == (3, 3)
    assert np.array_equal(rgb, colors)
    assert open(out + ".meta").read().startswith("scene_id=cli-test")
    assert not [n for n in os.listdir(tmp_path) if n.endswith(".tmp")]


def test_npy_points_input(tmp_path):
    frame, points, _, _ = three_point_fixture()
    frames_dir = str(tmp_path / "frames")
    write_frames(frames_dir, [frame])
    pts_path = str(tmp_path / "pts.npy")
    np.save(pts_path, points)
    out = str(tmp_path / "out.fobj")
    assert main(["--frames", frames_dir, "--points", pts_path,
                 "--out", out]) == 0
    _, _, feats, inst = read_scene(out)
    assert feats.shape == (3, 3)
    assert np.all(inst == -1)


def test_missing_frames_dir(tmp_path):
    assert main(["--frames", str(tmp_path / "nope"), "--points", "x",
                 "--out", "y"]) == 3


def test_bad_backbone(tmp_path):
    frame, points, colors, inst = three_point_fixture()
    frames_dir = str(tmp_path / "frames")
    write_frames(frames_dir, [frame])
    pts = str(tmp_path / "p.npy")
    np.save(pts, points)
    assert main(["--frames", frames_dir, "--points", pts,
                 "--out", str(tmp_path / "o"), "--backbone", "nope"]) == 3
