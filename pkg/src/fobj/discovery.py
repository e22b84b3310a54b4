"""Inference-time rollouts of the trained agent and mask scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geomreward import verify_center_consistency
from .masks import MaskRecord, dedupe_masks
from .policy import PolicyParams
from .ppo import (PPOConfig, ScoreRecord, collect_trajectory, seed_crop,
                  REWARD_POS)
from .semreward import CandidateMask, cut_cost
from .state import SceneState


@dataclass
class DiscoveredMask:
    scene_id: str
    member_ids: tuple            # superpoint ids
    point_indices: np.ndarray    # expanded point-level mask
    record: ScoreRecord          # verdicts and bank state at discovery time
    rollout: int


def rollout_discover(state: SceneState, seed_pp: PolicyParams,
                     merge_pp: PolicyParams, n_rollouts: int,
                     config: PPOConfig, rng: np.random.Generator,
                     crop: bool = True) -> list[DiscoveredMask]:
    """Run independent discovery episodes; return candidates that fused to
    +10, expanded to point level. The cost bank keeps updating exactly as in
    training, and each mask records the bank state its verdict used."""
    out = []
    for r in range(n_rollouts):
        elig = seed_crop(state, config.crop_radius, rng) if crop else None
        traj = collect_trajectory(state, seed_pp, merge_pp, config, rng,
                                  eligible=elig)
        for rec in traj.scored:
            if rec.fused == REWARD_POS:
                out.append(DiscoveredMask(
                    scene_id=state.scene_id, member_ids=rec.member_ids,
                    point_indices=state.candidate_point_indices(rec.member_ids),
                    record=rec, rollout=r))
    return out


def rescore_mask(state: SceneState, mask: DiscoveredMask) -> int:
    """Re-run both verdicts for a discovered mask against the bank state that
    was recorded with it; must reproduce +10 for every returned mask."""
    point_idx = state.candidate_point_indices(mask.member_ids)
    pts = state.scene.points[point_idx].astype(np.float64)
    fld = state.center_provider(pts, point_idx)
    geo = verify_center_consistency(pts, fld, radius=state.geo.radius,
                                    alpha=state.geo.alpha,
                                    min_pts=state.geo.min_pts,
                                    units=state.geo.units)
    cost = cut_cost(state.affinity, CandidateMask(mask.member_ids,
                                                  state.partition.K))
    rec = mask.record
    bank_accepts = np.isfinite(cost) and (
        rec.bank_size_before < state.bank.capacity or cost < rec.bank_max_before)
    sem = REWARD_POS if bank_accepts else -1
    return max(geo.reward, sem)


def score_masks(masks: list[DiscoveredMask]) -> list[MaskRecord]:
    """Confidence = max(geometric dominant fraction, 1 - cut cost), clamped
    into (0, 1]; ranks full, semantically distinct objects first."""
    out = []
    for m in masks:
        conf = max(m.record.dominant_fraction,
                   1.0 - min(m.record.cut_cost, 1.0))
        out.append(MaskRecord(scene_id=m.scene_id,
                              point_indices=m.point_indices,
                              score=float(np.clip(conf, 1e-6, 1.0)),
                              source=m.record.source))
    return out


def discover_and_dedupe(state: SceneState, seed_pp: PolicyParams,
                        merge_pp: PolicyParams, n_rollouts: int,
                        config: PPOConfig, rng: np.random.Generator,
                        dedupe_iou: float = 0.8) -> list[MaskRecord]:
    """Convenience: rollouts -> confidences -> greedy dedupe."""
    masks = rollout_discover(state, seed_pp, merge_pp, n_rollouts, config, rng)
    return dedupe_masks(score_masks(masks), iou_threshold=dedupe_iou)
