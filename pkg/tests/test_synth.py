import numpy as np
import pytest

from fobj.geomreward import center_field_oracle, instance_centroids
from fobj.synth import (FeatureSpec, SceneSpec, attach_semantic_features,
                        gen_center_training_set, gen_scene, gen_scenes,
                        sample_archetype, scene_seed)


class TestGenScene:
    def test_zero_objects_background_only(self):
        spec = SceneSpec(n_objects=(0, 0), seed=1, density=200.0)
        scene = gen_scene(spec)
        assert (scene.gt_instances == -1).all()

    def test_deterministic(self):
        spec = SceneSpec(seed=5, n_objects=(2, 3), density=200.0)
        a, b = gen_scene(spec), gen_scene(spec)
        assert a.points.tobytes() == b.points.tobytes()
        assert a.colors.tobytes() == b.colors.tobytes()
        assert np.array_equal(a.gt_instances, b.gt_instances)

    def test_requested_object_count_and_sampling_density(self):
        spec = SceneSpec(n_objects=(5, 5), seed=2, density=400.0,
                         room=(5.0, 5.0, 2.0))
        scene = gen_scene(spec)
        ids = set(scene.gt_instances.tolist()) - {-1}
        assert ids == set(range(5))
        # every object carries a sane number of surface samples:
        # smallest archetype face area * density, within a generous band
        for i in range(5):
            n = (scene.gt_instances == i).sum()
            assert n >= 0.8 * 400.0 * 0.1
        # floor sampling matches area * density within 20%
        floor = (scene.gt_instances == -1) & (scene.points[:, 2] < 0.05)
        assert abs(floor.sum() - 400.0 * 25.0) / (400.0 * 25.0) < 0.2

    def test_ids_partition_object_points(self):
        scene = gen_scene(SceneSpec(seed=3, n_objects=(3, 3), density=200.0))
        assert scene.gt_instances.min() == -1
        uniq = np.unique(scene.gt_instances)
        assert uniq.tolist() == [-1, 0, 1, 2]

    def test_colors_quantized_for_bit_exact_io(self):
        scene = gen_scene(SceneSpec(seed=4, n_objects=(2, 2), density=200.0))
        assert np.array_equal(scene.colors,
                              np.round(scene.colors * 255.0) / np.float32(255.0))

    def test_contact_scene_touches_wall(self):
        scene = gen_scene(SceneSpec(seed=6, n_objects=(2, 2), contact=True,
                                    density=300.0))
        first = scene.points[scene.gt_instances == 0]
        assert first[:, 1].min() < 0.1  # flush against the y=0 wall

    def test_placement_failure_raises_with_spec(self):
        spec = SceneSpec(room=(1.2, 1.2, 1.5), n_objects=(8, 8), seed=7,
                         density=100.0)
        with pytest.raises(RuntimeError, match="placement failed"):
            gen_scene(spec)

    def test_multi_scene_seed_split(self):
        spec = SceneSpec(n_objects=(1, 2), density=150.0)
        scenes = gen_scenes(spec, 3, master_seed=11)
        assert len({s.points.tobytes() for s in scenes}) == 3
        assert scene_seed(11, 0) == 11 ^ hash(0)


class TestSemanticFeatures:
    def test_zero_sigmas_identical_class_features(self):
        scene = gen_scene(SceneSpec(seed=8, n_objects=(2, 2), density=200.0,
                                    archetypes=("box",)))
        fs = FeatureSpec(instance_sigma=0.0, point_sigma=0.0)
        feats = attach_semantic_features(scene, fs, seed=1).semantic_features
        # both instances share the "box" class embedding
        f0 = feats[scene.gt_instances == 0]
        f1 = feats[scene.gt_instances == 1]
        assert np.allclose(f0, f0[0]) and np.allclose(f1, f1[0])
        assert np.allclose(f0[0], f1[0])

    def test_unit_norm_before_point_noise(self):
        scene = gen_scene(SceneSpec(seed=9, n_objects=(3, 3), density=200.0))
        fs = FeatureSpec(instance_sigma=0.05, point_sigma=0.0)
        feats = attach_semantic_features(scene, fs, seed=2).semantic_features
        for inst in (0, 1, 2, -1):
            rows = feats[scene.gt_instances == inst]
            assert abs(np.linalg.norm(rows[0].astype(np.float64)) - 1.0) < 1e-6

    def test_same_class_more_similar_than_cross_class(self):
        scene = gen_scene(SceneSpec(seed=10, n_objects=(4, 4), density=200.0,
                                    archetypes=("box", "chair")))
        classes = scene.provenance["object_classes"].split(",")
        fs = FeatureSpec(dim=16, instance_sigma=0.05, point_sigma=0.02)
        feats = attach_semantic_features(scene, fs, seed=3).semantic_features
        rng = np.random.default_rng(0)
        same, cross = [], []
        for _ in range(1000):
            i, j = rng.integers(0, 4, 2)
            pi = feats[scene.gt_instances == i]
            pj = feats[scene.gt_instances == j]
            a = pi[rng.integers(len(pi))].astype(np.float64)
            b = pj[rng.integers(len(pj))].astype(np.float64)
            cos = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
            if i != j:
                (same if classes[i] == classes[j] else cross).append(cos)
        if same and cross:
            assert np.mean(same) > np.mean(cross)


class TestCenterTrainingSet:
    def test_reproducible(self):
        a = gen_center_training_set(1, rng=np.random.default_rng(12))
        b = gen_center_training_set(1, rng=np.random.default_rng(12))
        assert a[0].points.tobytes() == b[0].points.tobytes()

    def test_plane_targets_always_zero(self):
        samples = gen_center_training_set(5, rng=np.random.default_rng(13))
        for s in samples:
            # zero targets exist (planes) and are exactly zero
            zero = np.linalg.norm(s.targets, axis=1) == 0
            assert zero.any()

    def test_multi_object_fraction_3sigma(self):
        samples = gen_center_training_set(
            1000, rng=np.random.default_rng(14), surface_density=120.0)
        frac = np.mean([s.multi_object for s in samples])
        assert abs(frac - 0.7) <= 0.043

    def test_view_counts_and_cameras(self):
        samples = gen_center_training_set(
            50, rng=np.random.default_rng(15), surface_density=120.0)
        for s in samples:
            assert s.n_views in (2, 3, 4)
            assert np.allclose(np.linalg.norm(s.cameras, axis=1), 2.0,
                               atol=1e-9)
            assert (np.abs(s.pitches_deg) <= 30.0).all()


def test_oracle_field_consistent_with_generated_scene():
    scene = gen_scene(SceneSpec(seed=16, n_objects=(3, 3), density=200.0))
    cents = instance_centroids(scene.points, scene.gt_instances)
    field = center_field_oracle(scene.points, scene.gt_instances, cents)
    for inst, c in cents.items():
        mask = scene.gt_instances == inst
        shifted = scene.points[mask].astype(np.float64) + field.offsets[mask]
        assert np.allclose(shifted, c, atol=1e-9)
    bg = scene.gt_instances == -1
    assert np.all(field.offsets[bg] == 0.0)


def test_archetype_samplers_rest_on_floor():
    rng = np.random.default_rng(17)
    for name in ("box", "cylinder", "table", "chair"):
        pts = sample_archetype(name, rng, density=300.0)
        # side surfaces reach down to the resting plane; no point below it
        assert 0.0 <= pts[:, 2].min() < 0.05
        assert len(pts) > 50
