import os

import numpy as np
import pytest

from featbridge.backbones import color_backbone
from featbridge.projection import project_features
from featbridge.sceneformat import read_scene, write_scene_with_features

from fixtures import three_point_fixture

GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "three_point.fobj")


def adapter_output_bytes(tmp_path):
    frame, points, colors, instance_ids = three_point_fixture()
    feats, covered = project_features(points, [frame], color_backbone)
    assert covered.all()
    path = str(tmp_path / "out.fobj")
    write_scene_with_features(points, colors, feats, instance_ids, path,
                              scene_id="three-point")
    return path


def test_round_trip_bit_exact(tmp_path):
    path = adapter_output_bytes(tmp_path)
    pts, rgb, feats, inst = read_scene(path)
    frame, points, colors, instance_ids = three_point_fixture()
    assert np.array_equal(pts, points.astype(np.float32))
    assert np.array_equal(rgb, colors)
    assert np.array_equal(inst, instance_ids)
    ref, _ = project_features(points, [frame], color_backbone)
    assert np.array_equal(feats, ref.astype(np.float32))


def test_feat_dim_in_header(tmp_path):
    path = adapter_output_bytes(tmp_path)
    import struct
    with open(path, "rb") as f:
        blob = f.read(16)
    _, n, d = struct.unpack("<III", blob[4:])
    assert n == 3 and d == 3


def test_golden_file_byte_identical(tmp_path):
    path = adapter_output_bytes(tmp_path)
    got = open(path, "rb").read()
    golden = open(GOLDEN, "rb").read()
    assert got == golden


def test_engine_loads_adapter_output(tmp_path):
    fobj_sceneio = pytest.importorskip(
        "fobj.sceneio", reason="engine not installed; file contract checked "
                               "against the committed golden bytes instead")
    path = adapter_output_bytes(tmp_path)
    scene = fobj_sceneio.load_scene(path)
    frame, points, colors, instance_ids = three_point_fixture()
    assert scene.n_points == 3
    assert np.array_equal(scene.points, points.astype(np.float32))
    assert np.array_equal(scene.gt_instances, instance_ids)
    ref, _ = project_features(points, [frame], color_backbone)
    assert np.array_equal(scene.semantic_features, ref.astype(np.float32))
    assert scene.scene_id == "three-point"


def test_engine_loads_golden_file():
    fobj_sceneio = pytest.importorskip("fobj.sceneio")
    scene = fobj_sceneio.load_scene(GOLDEN)
    assert scene.n_points == 3 and scene.feat_dim == 3


def test_write_without_features(tmp_path):
    path = str(tmp_path / "bare.fobj")
    write_scene_with_features(np.zeros((2, 3)), np.zeros((2, 3)), None,
                              np.array([-1, 0]), path)
    pts, rgb, feats, inst = read_scene(path)
    assert feats is None and len(pts) == 2
