import numpy as np
import pytest

from featbridge.backbones import color_backbone, get_backbone
from featbridge.projection import (Frame, bilinear_upsample, project_features,
                                   project_points)

from fixtures import three_point_fixture


def simple_frame(depth_value=2.0, size=8):
    rgb = np.random.default_rng(0).integers(0, 256, (size, size, 3),
                                            dtype=np.uint8)
    K = np.array([[10.0, 0, size / 2], [0, 10.0, size / 2], [0, 0, 1]])
    return Frame(rgb=rgb, depth=np.full((size, size), depth_value),
                 intrinsics=K, pose=np.eye(4))


class TestPinholeProjection:
    def test_matches_hand_computed(self):
        # analytic oracle: u = fx*x/z + cx, v = fy*y/z + cy
        frame = simple_frame()
        pts = np.array([[0.1, -0.05, 1.0], [0.0, 0.0, 2.0], [-0.2, 0.3, 2.5]])
        u, v, z = project_points(pts, frame)
        for i, (x, y, zz) in enumerate(pts):
            assert abs(u[i] - (10.0 * x / zz + 4.0)) < 0.5
            assert abs(v[i] - (10.0 * y / zz + 4.0)) < 0.5
            assert z[i] == pytest.approx(zz)

    def test_pose_translation(self):
        frame = simple_frame()
        frame.pose = np.eye(4)
        frame.pose[:3, 3] = [1.0, 0.0, -1.0]  # camera moved
        u, v, z = project_points(np.array([[1.0, 0.0, 1.0]]), frame)
        # in camera coordinates the point is at (0, 0, 2)
        assert u[0] == pytest.approx(4.0)
        assert v[0] == pytest.approx(4.0)
        assert z[0] == pytest.approx(2.0)

    def test_behind_camera_rejected(self):
        frame = simple_frame()
        feats, covered = project_features(np.array([[0.0, 0.0, -1.0]]),
                                          [frame], color_backbone)
        assert not covered[0]
        assert np.all(feats[0] == 0.0)


class TestDepthGate:
    def test_occluded_point_excluded(self):
        frame = simple_frame(depth_value=1.0)  # a wall at z=1 occludes z=2
        pt = np.array([[0.0, 0.0, 2.0]])
        feats, covered = project_features(pt, [frame], color_backbone)
        assert not covered[0]

    def test_agreeing_point_included(self):
        frame = simple_frame(depth_value=2.0)
        pt = np.array([[0.0, 0.0, 2.0]])
        feats, covered = project_features(pt, [frame], color_backbone)
        assert covered[0]

    def test_tolerance_respected(self):
        frame = simple_frame(depth_value=2.0)
        pt = np.array([[0.0, 0.0, 2.04]])
        _, covered_tight = project_features(pt, [frame], color_backbone,
                                            depth_tol=0.01)
        _, covered_loose = project_features(pt, [frame], color_backbone,
                                            depth_tol=0.05)
        assert not covered_tight[0] and covered_loose[0]


class TestAveraging:
    def test_single_frame_single_point(self):
        frame, points, _, _ = three_point_fixture()
        feats, covered = project_features(points[:1], [frame], color_backbone)
        assert covered[0]
        expected = frame.rgb[3, 1] / 255.0  # pixel the point projects to
        assert np.allclose(feats[0], expected, atol=1e-6)

    def test_two_frames_average(self):
        frame, points, _, _ = three_point_fixture()
        frame2 = Frame(rgb=np.full_like(frame.rgb, 255), depth=frame.depth,
                       intrinsics=frame.intrinsics, pose=frame.pose)
        f1, _ = project_features(points, [frame], color_backbone)
        f2, _ = project_features(points, [frame2], color_backbone)
        both, _ = project_features(points, [frame, frame2], color_backbone)
        assert np.allclose(both, (f1 + f2) / 2.0, atol=1e-6)

    def test_no_frames_errors(self):
        with pytest.raises(ValueError, match="no frames"):
            project_features(np.zeros((1, 3)), [], color_backbone)


class TestUpsampling:
    def test_identity_when_same_size(self):
        g = np.random.default_rng(1).random((4, 4, 2))
        assert np.array_equal(bilinear_upsample(g, (4, 4)), g)

    def test_constant_grid_upsamples_constant(self):
        g = np.full((2, 2, 3), 0.7)
        up = bilinear_upsample(g, (8, 8))
        assert up.shape == (8, 8, 3)
        assert np.allclose(up, 0.7)

    def test_patch_backbone_features_usable(self):
        # a coarse 2x2 feature grid upsampled to the image and projected
        frame, points, _, _ = three_point_fixture()

        def patch_backbone(rgb):
            return np.arange(8.0).reshape(2, 2, 2)

        feats, covered = project_features(points, [frame], patch_backbone)
        assert covered.all()
        assert feats.shape == (3, 2)


def test_invalid_pose_rejected():
    with pytest.raises(ValueError, match="invertible"):
        Frame(rgb=np.zeros((4, 4, 3), dtype=np.uint8),
              depth=np.ones((4, 4)), intrinsics=np.eye(3),
              pose=np.zeros((4, 4)))


def test_unknown_backbone():
    with pytest.raises(ValueError, match="unknown backbone"):
        get_backbone("resnet-from-nowhere")
