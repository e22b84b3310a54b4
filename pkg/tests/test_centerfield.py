import numpy as np
import pytest

from fobj.centerfield import (CAMERA_DISTANCE, init_center_regressor,
                              load_center_regressor, make_center_training_sample,
                              mse_loss, predict_center_field,
                              save_center_regressor, train_center_regressor)
from fobj.geomreward import verify_center_consistency

from oracles import check_gradients


def shapes(rng, n_shapes=3):
    return [rng.uniform(-0.5, 0.5, (200, 3)) * np.array([1.0, 0.6, 1.4])
            for _ in range(n_shapes)]


class TestSampleSynthesis:
    def test_deterministic(self):
        rng1 = np.random.default_rng(42)
        s1 = make_center_training_sample(shapes(np.random.default_rng(9)), rng1)
        rng2 = np.random.default_rng(42)
        s2 = make_center_training_sample(shapes(np.random.default_rng(9)), rng2)
        assert s1.points.tobytes() == s2.points.tobytes()
        assert s1.targets.tobytes() == s2.targets.tobytes()
        assert s1.n_views == s2.n_views

    def test_camera_distance_and_pitch(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            s = make_center_training_sample(shapes(rng), rng)
            dists = np.linalg.norm(s.cameras, axis=1)
            assert np.allclose(dists, CAMERA_DISTANCE, atol=1e-9)
            assert (np.abs(s.pitches_deg) <= 30.0 + 1e-9).all()
            assert s.n_views in (2, 3, 4)
            assert len(s.cameras) == s.n_views

    def test_plane_targets_zero_object_targets_not(self):
        rng = np.random.default_rng(2)
        s = make_center_training_sample(shapes(rng), rng)
        norms = np.linalg.norm(s.targets, axis=1)
        assert (norms == 0).any(), "some plane points should be visible"
        assert (norms > 0).any(), "some object points should be visible"

    def test_requires_objects(self):
        with pytest.raises(ValueError):
            make_center_training_sample([], np.random.default_rng(0))


class TestRegressor:
    def test_overfit_single_sample(self):
        rng = np.random.default_rng(3)
        sample = make_center_training_sample(shapes(rng), rng)
        params = init_center_regressor(np.random.default_rng(0), hidden_dim=64)
        initial = mse_loss(params, sample.points, sample.targets).item()
        params, curve = train_center_regressor([sample], params, epochs=500,
                                               lr=5e-3)
        assert curve[-1] < 0.1 * initial
        assert curve[-1] < curve[0]

    def test_lr_zero_leaves_params(self):
        rng = np.random.default_rng(4)
        sample = make_center_training_sample(shapes(rng), rng)
        params = init_center_regressor(np.random.default_rng(0), hidden_dim=16)
        before = [w.data.copy() for w in params.tensors()]
        params, _ = train_center_regressor([sample], params, epochs=3, lr=0.0)
        for b, w in zip(before, params.tensors()):
            assert np.array_equal(b, w.data)

    @pytest.mark.parametrize("seed", range(3))
    def test_gradients_match_fd(self, seed):
        rng = np.random.default_rng(seed)
        params = init_center_regressor(rng, hidden_dim=8, dtype=np.float64)
        pts = rng.uniform(-0.5, 0.5, (12, 3))
        tgt = rng.normal(0, 0.2, (12, 3))
        check_gradients(lambda: mse_loss(params, pts, tgt),
                        params.tensors(), rng=rng)

    def test_predict_offsets_scale_back(self):
        rng = np.random.default_rng(5)
        params = init_center_regressor(rng, hidden_dim=16)
        pts = rng.uniform(0, 1, (30, 3))
        f1 = predict_center_field(pts, params)
        f2 = predict_center_field(pts * 4.0, params)
        # same normalized shape, so offsets scale with the candidate
        assert np.allclose(f2.offsets, 4.0 * f1.offsets, rtol=1e-4, atol=1e-6)

    def test_checkpoint_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        params = init_center_regressor(rng, hidden_dim=16)
        path = str(tmp_path / "c.fobc")
        save_center_regressor(params, path)
        back = load_center_regressor(path)
        assert back.hidden_dim == 16
        assert back.normalize_inputs == params.normalize_inputs
        for a, b in zip(params.tensors(), back.tensors()):
            assert np.array_equal(a.data, b.data)


def test_trained_regressor_supports_verification():
    """A regressor trained on one simple shape should pass a same-shape
    candidate through the geometric check."""
    rng = np.random.default_rng(7)
    cube = rng.uniform(-0.5, 0.5, (300, 3))
    sample_shapes = [cube]
    samples = [make_center_training_sample(sample_shapes, rng)
               for _ in range(4)]
    params = init_center_regressor(np.random.default_rng(1), hidden_dim=32)
    params, curve = train_center_regressor(samples, params, epochs=150, lr=3e-3)
    assert curve[-1] < curve[0]
    candidate = np.random.default_rng(2).uniform(-0.3, 0.3, (150, 3))
    field = predict_center_field(candidate, params)
    verdict = verify_center_consistency(candidate, field, radius=0.2,
                                        alpha=0.3)
    assert verdict.reward in (10, -1)  # smoke: end-to-end plumbing holds
