"""Committed end-to-end benchmark: fixed scene suite, seeds, and harness.

Twenty training scenes and ten held-out scenes are generated from fixed
specs and seeds. For each master seed the harness trains the agent with the
ground-truth center field and synthetic semantic features, then evaluates
direct-rollout pseudo masks on the held-out scenes, comparing against the
untrained-policy baseline measured by the same code path.

Everything here is pinned: changing any constant changes the benchmark.
"""

from __future__ import annotations

import numpy as np

from . import encoder, synth
from .config import EngineConfig
from .discovery import discover_and_dedupe
from .evalap import evaluate_ap
from .masks import PseudoMaskBank
from .policy import init_merge_policy, init_seed_policy
from .ppo import PPOConfig, train
from .semreward import CostBank
from .state import (GeoParams, make_oracle_center_provider, preprocess_scene)
from .superpoints import build_partition

TRAIN_SUITE_SEED = 20_001
HELDOUT_SUITE_SEED = 77_007
N_TRAIN_SCENES = 20
N_HELDOUT_SCENES = 10
MASTER_SEEDS = (101, 202, 303)
EPOCHS = 200
CHECKPOINTS = (50, 100, 150, 200)

SCENE_SPEC = synth.SceneSpec(
    room=(4.0, 4.0, 1.8), n_objects=(4, 6), density=350.0,
    archetypes=("box", "cylinder", "box", "table"), clutter=True,
    noise_sigma=0.004, background_patch=1.2)
# zero-support background: clutter carries no semantic objectness, so junk
# masks cost +inf from the first epoch and only genuine (multi-part) object
# merges can enter the cost bank
FEATURE_SPEC = synth.FeatureSpec(dim=16, embedding_seed=7,
                                 instance_sigma=0.05, point_sigma=0.02,
                                 common_scale=0.0, background_zero=True)


def benchmark_config() -> EngineConfig:
    """Engine knobs pinned for the benchmark suite."""
    cfg = EngineConfig()
    cfg.k_f = 0.3
    cfg.min_size = 25
    cfg.n_rollouts = 32
    # with the exact oracle field, object clusters are coincident points, so
    # a stricter core threshold costs nothing on objects while keeping
    # spread-out background at this sampling density out of the +10 region
    cfg.geo_min_pts = 12
    # 800 batches total: the paper-default 1e-4 with one pass per batch moves
    # the small policies too little at desk scale, so the benchmark pins a
    # higher rate and reuses each batch for a few clipped passes
    cfg.ppo = PPOConfig(lr=3e-3, inner_epochs=4)
    return cfg


def generate_suite(which: str) -> list:
    if which == "train":
        scenes = synth.gen_scenes(SCENE_SPEC, N_TRAIN_SCENES, TRAIN_SUITE_SEED)
    elif which == "heldout":
        scenes = synth.gen_scenes(SCENE_SPEC, N_HELDOUT_SCENES,
                                  HELDOUT_SUITE_SEED)
    else:
        raise ValueError(which)
    for i, sc in enumerate(scenes):
        synth.attach_semantic_features(sc, FEATURE_SPEC, seed=i)
    return scenes


_partition_cache: dict = {}


def suite_partitions(which: str, scenes, cfg: EngineConfig):
    """Partitions depend only on the scenes and segmentation knobs, so they
    are shared across master seeds."""
    key = (which, cfg.knn, cfg.color_weight, cfg.k_f, cfg.min_size,
           cfg.adjacency_dist)
    if key not in _partition_cache:
        _partition_cache[key] = [
            build_partition(sc, knn=cfg.knn, color_weight=cfg.color_weight,
                            k_f=cfg.k_f, min_size=cfg.min_size,
                            adjacency_dist=cfg.adjacency_dist)
            for sc in scenes]
    return _partition_cache[key]


def _copy_partition(p):
    from dataclasses import replace
    return replace(p, features=None)


def build_states(scenes, partitions, enc_params, cfg: EngineConfig):
    geo = GeoParams(radius=cfg.geo_radius, alpha=cfg.geo_alpha,
                    min_pts=cfg.geo_min_pts, units=cfg.geo_units)
    return [preprocess_scene(sc, enc_params, make_oracle_center_provider(sc),
                             bank_capacity=cfg.bank_capacity, geo=geo,
                             partition=_copy_partition(p))
            for sc, p in zip(scenes, partitions)]


def init_agent(master_seed: int, cfg: EngineConfig, in_dim: int):
    rng = np.random.default_rng([master_seed, 0xF0B])
    enc = encoder.init_point_encoder(in_dim, rng, hidden_dim=cfg.encoder_hidden,
                                     out_dim=cfg.feature_dim)
    seed_pp = init_seed_policy(cfg.feature_dim, rng,
                               hidden_dim=cfg.policy_hidden)
    merge_pp = init_merge_policy(cfg.feature_dim, rng,
                                 hidden_dim=cfg.policy_hidden)
    return enc, seed_pp, merge_pp


def evaluate_policies(scenes, partitions, enc_params, seed_pp, merge_pp,
                      cfg: EngineConfig, eval_seed: int):
    """Direct-rollout pseudo masks on fresh states (fresh cost banks)."""
    states = build_states(scenes, partitions, enc_params, cfg)
    predictions = []
    for si, st in enumerate(states):
        st.bank = CostBank(capacity=cfg.bank_capacity)
        rng = np.random.default_rng([eval_seed, si])
        predictions.extend(discover_and_dedupe(
            st, seed_pp, merge_pp, cfg.n_rollouts, cfg.ppo, rng,
            dedupe_iou=cfg.dedupe_iou))
    gt = {sc.scene_id: sc.gt_instances for sc in scenes}
    return predictions, evaluate_ap(predictions, gt)


def run_benchmark(master_seed: int, epochs: int = EPOCHS,
                  cfg: EngineConfig | None = None,
                  train_scenes=None, heldout_scenes=None) -> dict:
    """One full train + evaluate pass for one master seed."""
    cfg = cfg or benchmark_config()
    train_scenes = train_scenes or generate_suite("train")
    heldout_scenes = heldout_scenes or generate_suite("heldout")
    train_parts = suite_partitions("train", train_scenes, cfg)
    heldout_parts = suite_partitions("heldout", heldout_scenes, cfg)

    in_dim = 6 + train_scenes[0].feat_dim
    enc, seed_pp, merge_pp = init_agent(master_seed, cfg, in_dim)

    _, baseline_report = evaluate_policies(
        heldout_scenes, heldout_parts, enc, seed_pp, merge_pp, cfg,
        eval_seed=master_seed + 1)

    states = build_states(train_scenes, train_parts, enc, cfg)
    bank = PseudoMaskBank(dedupe_iou=cfg.dedupe_iou)
    seed_pp, merge_pp, metrics, bank = train(
        states, seed_pp, merge_pp, cfg.ppo, epochs=epochs,
        master_seed=master_seed, bank=bank)

    predictions, trained_report = evaluate_policies(
        heldout_scenes, heldout_parts, enc, seed_pp, merge_pp, cfg,
        eval_seed=master_seed + 2)

    return {
        "master_seed": master_seed,
        "metrics": metrics,
        "bank": bank,
        "predictions": predictions,
        "trained": trained_report,
        "baseline": baseline_report,
        "train_gt": {sc.scene_id: sc.gt_instances for sc in train_scenes},
        "heldout_gt": {sc.scene_id: sc.gt_instances for sc in heldout_scenes},
        "policies": (enc, seed_pp, merge_pp),
    }


def reward_trend(metrics) -> tuple[float, float]:
    """Mean episode reward over the first and last tenth of epochs."""
    n = max(1, len(metrics) // 10)
    first = float(np.mean([m["mean_episode_reward"] for m in metrics[:n]]))
    last = float(np.mean([m["mean_episode_reward"] for m in metrics[-n:]]))
    return first, last
