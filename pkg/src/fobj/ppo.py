"""Policy-gradient training of the discovery agent.

One trajectory is one discovery episode: a seed draw restricted to a randomly
cropped spherical region, then up to T_max merge rounds. After every merge
round the candidate is scored by both reward modules and the higher reward is
kept; +10 terminates the episode. Updates use the clipped PPO surrogate with
generalized advantage estimation, separate value heads per policy, and one
optimizer step per call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geomreward import verify_center_consistency
from .masks import MaskRecord, PseudoMaskBank
from .policy import (PolicyParams, merge_distribution_stats, merge_forward,
                     sample_merge, sample_seed, seed_distribution_stats,
                     seed_forward)
from .semreward import CandidateMask, cut_cost
from .state import SceneState
from .tensorkit import Adam, minimum, stack

REWARD_POS = 10
REWARD_NEG = -1


@dataclass
class PPOConfig:
    clip_ratio: float = 0.2
    gae_lambda: float = 0.9
    gamma: float = 0.9
    coef_policy: float = 1.0
    coef_value: float = 1.0
    coef_entropy: float = 0.1
    lr: float = 1e-4
    batch_scenes: int = 5
    crop_radius: float = 1.0  # meters
    T_max: int = 5
    inner_epochs: int = 1  # optimizer passes per collected batch
    # rewards are multiplied by this before GAE so value-regression targets
    # stay near unit scale; recorded step rewards keep the raw +10/-1 values
    reward_scale: float = 1.0
    max_grad_norm: float = 0.5  # global-norm clip per policy, <=0 disables

    def __post_init__(self):
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError("clip_ratio must be in (0, 1)")
        if self.inner_epochs < 1:
            raise ValueError("inner_epochs must be >= 1")
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be > 0")
        for name in ("gae_lambda", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


# ---- episode machinery ----

@dataclass
class SeedStep:
    crop_ids: np.ndarray       # eligible superpoint ids shown to the policy
    features: np.ndarray       # (K_crop, D) feature snapshot
    chosen_pos: int            # index into crop_ids
    logp: float
    value: float
    reward: int | None = None  # only set in the zero-neighbor seed case

    kind = "seed"


@dataclass
class MergeStep:
    region_feature: np.ndarray
    neighbor_ids: np.ndarray
    neighbor_features: np.ndarray  # (Q, D)
    chosen_mask: np.ndarray        # (Q,) bool
    logp: float
    value: float
    reward: int = REWARD_NEG

    kind = "merge"


@dataclass
class ScoreRecord:
    member_ids: tuple
    fused: int
    geo_reward: int
    dominant_fraction: float
    sem_reward: int
    cut_cost: float
    bank_size_before: int
    bank_max_before: float
    source: str  # which module granted +10: "geo", "sem", "both", or ""


@dataclass
class Trajectory:
    steps: list
    scored: list = field(default_factory=list)
    terminal: bool = True

    def episode_reward(self) -> float:
        return float(sum(s.reward for s in self.steps if s.reward is not None))

    def final_reward(self) -> int:
        rewards = [s.reward for s in self.steps if s.reward is not None]
        return rewards[-1] if rewards else REWARD_NEG


def seed_crop(state: SceneState, radius: float, rng: np.random.Generator,
              max_retries: int = 8) -> np.ndarray:
    """Superpoints whose centroid lies inside a sphere around a random scene
    point; falls back to all superpoints if retries keep coming up empty."""
    if radius <= 0:
        raise ValueError("radius must be > 0")
    pts = state.scene.points
    cent = state.partition.centroids
    for _ in range(max_retries):
        center = pts[int(rng.integers(len(pts)))]
        d = np.linalg.norm(cent - center.astype(np.float64), axis=1)
        elig = np.nonzero(d <= radius)[0]
        if elig.size:
            return elig
    return np.arange(state.partition.K)


def fuse_rewards(geo: int, sem: int) -> int:
    """Keep the higher of the two module rewards."""
    return max(geo, sem)


def score_candidate(state: SceneState, member_ids) -> ScoreRecord:
    """Run both reward modules on a superpoint-id candidate and fuse."""
    member_ids = tuple(sorted(int(i) for i in member_ids))
    point_idx = state.candidate_point_indices(member_ids)
    pts = state.scene.points[point_idx].astype(np.float64)
    fld = state.center_provider(pts, point_idx)
    geo = verify_center_consistency(pts, fld, radius=state.geo.radius,
                                    alpha=state.geo.alpha,
                                    min_pts=state.geo.min_pts,
                                    units=state.geo.units)
    cost = cut_cost(state.affinity, CandidateMask(member_ids, state.partition.K))
    size_before, max_before = len(state.bank.costs), state.bank.max()
    sem = state.bank.update_and_reward(cost)
    fused = fuse_rewards(geo.reward, sem)
    if fused == REWARD_POS:
        source = {(True, True): "both", (True, False): "geo",
                  (False, True): "sem"}[(geo.reward == REWARD_POS,
                                         sem == REWARD_POS)]
    else:
        source = ""
    return ScoreRecord(member_ids=member_ids, fused=fused,
                       geo_reward=geo.reward,
                       dominant_fraction=geo.dominant_fraction,
                       sem_reward=sem, cut_cost=cost,
                       bank_size_before=size_before,
                       bank_max_before=max_before, source=source)


def _neighbor_ids(state: SceneState, members: list) -> np.ndarray:
    rows = state.partition.adjacency[members]
    mask = rows.any(axis=0)
    mask[members] = False
    return np.nonzero(mask)[0]


def _region_feature(state: SceneState, members: list, sizes: np.ndarray) -> np.ndarray:
    w = sizes[members].astype(np.float64)
    f = state.features[members].astype(np.float64)
    return ((w[:, None] * f).sum(axis=0) / w.sum()).astype(state.features.dtype)


def collect_trajectory(state: SceneState, seed_pp: PolicyParams,
                       merge_pp: PolicyParams, config: PPOConfig,
                       rng: np.random.Generator,
                       eligible: np.ndarray | None = None) -> Trajectory:
    """One discovery episode under the current parameter snapshot."""
    K = state.partition.K
    if K == 0:
        raise ValueError("scene has no superpoints")
    if eligible is None or len(eligible) == 0:
        eligible = np.arange(K)
    feats = state.features
    sizes = state.partition.sizes()

    probs, value = seed_forward(feats[eligible], seed_pp)
    a = sample_seed(probs.data, value.item(), rng)
    chosen_pos = int(a.indices[0])
    seed_id = int(eligible[chosen_pos])
    seed_step = SeedStep(crop_ids=np.asarray(eligible).copy(),
                         features=feats[eligible].copy(),
                         chosen_pos=chosen_pos, logp=a.logp, value=a.value)
    steps = [seed_step]
    scored = []
    members = [seed_id]

    if _neighbor_ids(state, members).size == 0:
        # isolated seed: no merge action exists, score the singleton
        rec = score_candidate(state, members)
        seed_step.reward = rec.fused
        return Trajectory(steps=steps, scored=[rec])

    for _ in range(config.T_max):
        nb = _neighbor_ids(state, members)
        region = _region_feature(state, members, sizes)
        probs, value = merge_forward(region, feats[nb], merge_pp)
        a = sample_merge(probs.data, value.item(), rng)
        chosen_mask = np.zeros(len(nb), dtype=bool)
        chosen_mask[a.indices] = True
        members = members + [int(i) for i in nb[a.indices]]
        rec = score_candidate(state, members)
        steps.append(MergeStep(region_feature=region, neighbor_ids=nb,
                               neighbor_features=feats[nb].copy(),
                               chosen_mask=chosen_mask, logp=a.logp,
                               value=a.value, reward=rec.fused))
        scored.append(rec)
        if rec.fused == REWARD_POS or a.indices.size == 0:
            break
    return Trajectory(steps=steps, scored=scored)


# ---- advantage estimation ----

def gae(rewards, values, gamma: float, lam: float):
    """delta_t = r_t + gamma V_{t+1} - V_t with V_T = 0;
    A_t = delta_t + gamma*lam*A_{t+1}; returns = A + V."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.shape != values.shape:
        raise ValueError("rewards and values must have equal length")
    T = len(rewards)
    adv = np.zeros(T)
    running = 0.0
    for t in range(T - 1, -1, -1):
        v_next = values[t + 1] if t + 1 < T else 0.0
        delta = rewards[t] + gamma * v_next - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
    return adv, adv + values


def trajectory_gae(traj: Trajectory, config: PPOConfig):
    """GAE over one episode. The seed step carries no recorded reward (unless
    degenerate); it enters the recursion with an immediate reward of zero.
    Rewards are scaled by config.reward_scale so the value head regresses
    near-unit targets."""
    rewards = [0.0 if traj.steps[0].reward is None else float(traj.steps[0].reward)]
    rewards += [float(s.reward) for s in traj.steps[1:]]
    rewards = [r * config.reward_scale for r in rewards]
    values = [s.value for s in traj.steps]
    return gae(rewards, values, config.gamma, config.gae_lambda)


# ---- PPO loss and update ----

def standardize(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    adv = np.asarray(adv, dtype=np.float64)
    return (adv - adv.mean()) / (adv.std() + eps)


def policy_loss(samples, pp: PolicyParams, kind: str, config: PPOConfig):
    """Clipped-surrogate + value + entropy loss over (step, adv, ret) samples.

    Advantages are expected pre-standardized. Returns (total, parts dict).
    """
    surrs, vlosses, ents = [], [], []
    for step, adv, ret in samples:
        if kind == "seed":
            probs, value = seed_forward(step.features, pp)
            logp, ent = seed_distribution_stats(probs, step.chosen_pos)
        else:
            probs, value = merge_forward(step.region_feature,
                                         step.neighbor_features, pp)
            logp, ent = merge_distribution_stats(probs, step.chosen_mask)
        ratio = (logp - step.logp).exp()
        lo, hi = 1.0 - config.clip_ratio, 1.0 + config.clip_ratio
        surrs.append(minimum(ratio * adv, ratio.clip(lo, hi) * adv))
        diff = value - ret
        vlosses.append(diff * diff)
        ents.append(ent)
    l_clip = -stack(surrs).mean()
    l_value = stack(vlosses).mean()
    l_entropy = -stack(ents).mean()
    total = (config.coef_policy * l_clip + config.coef_value * l_value
             + config.coef_entropy * l_entropy)
    return total, {"clip": l_clip.item(), "value": l_value.item(),
                   "entropy": l_entropy.item()}


def _gather_samples(trajectories, config: PPOConfig):
    seed_samples, merge_samples = [], []
    for traj in trajectories:
        adv, ret = trajectory_gae(traj, config)
        for i, step in enumerate(traj.steps):
            target = seed_samples if step.kind == "seed" else merge_samples
            target.append([step, adv[i], ret[i]])
    return seed_samples, merge_samples


def ppo_update(trajectories, seed_pp: PolicyParams, merge_pp: PolicyParams,
               config: PPOConfig, seed_opt: Adam | None = None,
               merge_opt: Adam | None = None) -> dict:
    """PPO update per policy on a batch of trajectories.

    Takes `inner_epochs` optimizer passes over the same samples; ratios stay
    anchored to the behavior policy's recorded log-probs, so the clip bounds
    the drift across passes.
    """
    if not trajectories:
        raise ValueError("need at least one trajectory")
    seed_samples, merge_samples = _gather_samples(trajectories, config)
    stats = {}
    for kind, samples, pp, opt in (("seed", seed_samples, seed_pp, seed_opt),
                                   ("merge", merge_samples, merge_pp, merge_opt)):
        if not samples:
            continue
        advs = standardize(np.array([s[1] for s in samples]))
        for s, a in zip(samples, advs):
            s[1] = float(a)
        opt = opt or Adam(pp.tensors(), lr=config.lr)
        for _ in range(config.inner_epochs):
            loss, parts = policy_loss(samples, pp, kind, config)
            val = loss.item()
            if not np.isfinite(val):
                raise FloatingPointError(
                    f"non-finite {kind} PPO loss {val!r}; parts={parts}")
            opt.zero_grad()
            loss.backward()
            _clip_grad_norm(pp.tensors(), config.max_grad_norm)
            opt.step()
        stats[kind] = {"loss": val, **parts, "n_samples": len(samples)}
    return stats


def _clip_grad_norm(tensors, max_norm: float):
    if max_norm <= 0:
        return
    total = np.sqrt(sum(float((t.grad ** 2).sum()) for t in tensors
                        if t.grad is not None))
    if total > max_norm:
        scale = max_norm / total
        for t in tensors:
            if t.grad is not None:
                t.grad = t.grad * scale


# ---- training loop ----

def train(states: list[SceneState], seed_pp: PolicyParams,
          merge_pp: PolicyParams, config: PPOConfig, epochs: int,
          master_seed: int, bank: PseudoMaskBank | None = None):
    """Full training run; deterministic given (states, config, master_seed).

    An epoch collects one trajectory per scene (fresh seed crops), updating
    after every `batch_scenes` trajectories. Positive candidates are stored in
    the pseudo-mask bank at point level. Returns (seed_pp, merge_pp, metrics,
    bank).
    """
    bank = bank if bank is not None else PseudoMaskBank()
    seed_opt = Adam(seed_pp.tensors(), lr=config.lr)
    merge_opt = Adam(merge_pp.tensors(), lr=config.lr)
    metrics = []
    for epoch in range(epochs):
        batch, ep_rewards, n_pos = [], [], 0
        upd_stats = []

        def flush():
            if batch:
                upd_stats.append(ppo_update(batch, seed_pp, merge_pp, config,
                                            seed_opt, merge_opt))
                batch.clear()

        for si, state in enumerate(states):
            rng = np.random.default_rng([master_seed, epoch, si])
            elig = seed_crop(state, config.crop_radius, rng)
            traj = collect_trajectory(state, seed_pp, merge_pp, config, rng,
                                      eligible=elig)
            ep_rewards.append(traj.episode_reward())
            for rec in traj.scored:
                if rec.fused == REWARD_POS:
                    n_pos += 1
                    conf = max(rec.dominant_fraction,
                               1.0 - min(rec.cut_cost, 1.0))
                    bank.add(MaskRecord(
                        scene_id=state.scene_id,
                        point_indices=state.candidate_point_indices(rec.member_ids),
                        score=float(np.clip(conf, 1e-6, 1.0)),
                        source=rec.source, epoch=epoch))
            batch.append(traj)
            if len(batch) >= config.batch_scenes:
                flush()
        flush()
        metrics.append({
            "epoch": epoch,
            "mean_episode_reward": float(np.mean(ep_rewards)) if ep_rewards else 0.0,
            "n_positive": n_pos,
            "bank_total": bank.size(),
            "n_updates": len(upd_stats),
            "losses": _mean_update_stats(upd_stats),
        })
    return seed_pp, merge_pp, metrics, bank


def _mean_update_stats(upd_stats: list) -> dict:
    out = {}
    for kind in ("seed", "merge"):
        vals = [u[kind]["loss"] for u in upd_stats if kind in u]
        if vals:
            out[kind] = float(np.mean(vals))
    return out
