import numpy as np
import pytest

from fobj import policy as pol
from fobj.discovery import (discover_and_dedupe, rescore_mask,
                            rollout_discover, score_masks)
from fobj.masks import MaskRecord, PseudoMaskBank, dedupe_masks, mask_iou
from fobj.ppo import PPOConfig
from fobj.semreward import CostBank


@pytest.fixture()
def policies(small_state):
    rng = np.random.default_rng(31)
    D = small_state.features.shape[1]
    return (pol.init_seed_policy(D, rng, hidden_dim=16),
            pol.init_merge_policy(D, rng, hidden_dim=16))


class TestRollouts:
    def test_zero_rollouts_empty(self, small_state, policies):
        out = rollout_discover(small_state, *policies, 0, PPOConfig(),
                               np.random.default_rng(0))
        assert out == []

    def test_deterministic_given_seed(self, small_state, policies):
        runs = []
        for _ in range(2):
            small_state.bank = CostBank(capacity=20)
            out = rollout_discover(small_state, *policies, 5, PPOConfig(),
                                   np.random.default_rng(7))
            runs.append([(m.member_ids, m.rollout) for m in out])
        assert runs[0] == runs[1]

    def test_masks_reverify_positive(self, small_state, policies):
        small_state.bank = CostBank(capacity=20)
        out = rollout_discover(small_state, *policies, 8, PPOConfig(),
                               np.random.default_rng(3))
        assert out, "expected at least one positive mask"
        for m in out:
            assert rescore_mask(small_state, m) == 10

    def test_point_expansion_matches_partition(self, small_state, policies):
        small_state.bank = CostBank(capacity=20)
        out = rollout_discover(small_state, *policies, 4, PPOConfig(),
                               np.random.default_rng(4))
        for m in out:
            expected = np.concatenate(
                [small_state.sp_points[k] for k in sorted(m.member_ids)])
            assert np.array_equal(np.sort(m.point_indices), np.sort(expected))


class TestDedupe:
    def _rec(self, ids, score, sid="s"):
        return MaskRecord(scene_id=sid, point_indices=np.array(ids),
                          score=score)

    def test_identical_duplicates_collapse(self):
        masks = [self._rec([1, 2, 3], 0.9), self._rec([1, 2, 3], 0.8)]
        kept = dedupe_masks(masks, 0.8)
        assert len(kept) == 1 and kept[0].score == 0.9

    def test_disjoint_masks_kept(self):
        masks = [self._rec([1, 2], 0.9), self._rec([5, 6], 0.8)]
        assert len(dedupe_masks(masks, 0.8)) == 2

    def test_crafted_triple_two_survivors(self):
        # IoU(a,b) = 9/10 = 0.9, IoU(a,c) = 3/10, IoU(b,c) = 3/9
        a = self._rec(list(range(10)), 0.9)
        b = self._rec(list(range(9)), 0.8)
        c = self._rec([0, 1, 2], 0.7)
        assert mask_iou(a.point_indices, b.point_indices) == pytest.approx(0.9)
        assert mask_iou(a.point_indices, c.point_indices) == pytest.approx(0.3)
        kept = dedupe_masks([a, b, c], 0.8)
        assert len(kept) == 2
        assert kept[0].score == 0.9 and kept[1].score == 0.7

    def test_different_scenes_never_compared(self):
        masks = [self._rec([1, 2, 3], 0.9, "a"), self._rec([1, 2, 3], 0.8, "b")]
        assert len(dedupe_masks(masks, 0.8)) == 2

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            dedupe_masks([], 0.0)


class TestScoreMasks:
    def test_confidence_formula(self, small_state, policies):
        small_state.bank = CostBank(capacity=20)
        out = rollout_discover(small_state, *policies, 6, PPOConfig(),
                               np.random.default_rng(5))
        scored = score_masks(out)
        for m, s in zip(out, scored):
            expected = max(m.record.dominant_fraction,
                           1.0 - min(m.record.cut_cost, 1.0))
            expected = float(np.clip(expected, 1e-6, 1.0))
            assert s.score == pytest.approx(expected)
            assert 0.0 < s.score <= 1.0

    def test_full_dominant_fraction_gives_one(self):
        from fobj.discovery import DiscoveredMask
        from fobj.ppo import ScoreRecord
        rec = ScoreRecord(member_ids=(0,), fused=10, geo_reward=10,
                          dominant_fraction=1.0, sem_reward=-1, cut_cost=0.9,
                          bank_size_before=0, bank_max_before=np.inf,
                          source="geo")
        m = DiscoveredMask(scene_id="s", member_ids=(0,),
                           point_indices=np.array([1, 2]), record=rec,
                           rollout=0)
        assert score_masks([m])[0].score == 1.0


class TestPseudoMaskBank:
    def test_first_copy_kept(self):
        bank = PseudoMaskBank(dedupe_iou=0.8)
        m1 = MaskRecord("s", np.arange(10), 0.5, epoch=1)
        m2 = MaskRecord("s", np.arange(10), 0.9, epoch=5)
        assert bank.add(m1) is True
        assert bank.add(m2) is False
        assert bank.masks("s")[0].epoch == 1

    def test_growth_monotone(self, small_state, policies):
        bank = PseudoMaskBank()
        small_state.bank = CostBank(capacity=20)
        sizes = []
        rng = np.random.default_rng(9)
        for epoch in range(5):
            for m in rollout_discover(small_state, *policies, 2, PPOConfig(),
                                      rng):
                bank.add(MaskRecord(m.scene_id, m.point_indices, 0.5,
                                    epoch=epoch))
            sizes.append(bank.size())
        assert sizes == sorted(sizes)

    def test_json_round_trip(self, tmp_path):
        bank = PseudoMaskBank()
        bank.add(MaskRecord("sc", np.array([3, 1, 2]), 0.75, source="geo",
                            epoch=4))
        path = str(tmp_path / "bank.json")
        bank.save(path, "sc")
        bank2 = PseudoMaskBank()
        assert bank2.load(path) == "sc"
        m = bank2.masks("sc")[0]
        assert m.point_indices.tolist() == [1, 2, 3]
        assert m.score == 0.75 and m.epoch == 4 and m.source == "geo"


def test_discover_and_dedupe_pipeline(small_state, policies):
    small_state.bank = CostBank(capacity=20)
    out = discover_and_dedupe(small_state, *policies, 8, PPOConfig(),
                              np.random.default_rng(10))
    for i, a in enumerate(out):
        for b in out[i + 1:]:
            assert mask_iou(a.point_indices, b.point_indices) <= 0.8
