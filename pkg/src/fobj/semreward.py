"""Semantic consistency cut reward.

Affinity between superpoints is cosine feature similarity (clamped to
nonnegative) masked by spatial adjacency. A candidate mask is scored by its
normalized cut cost, cut/vol, in matrix form; low cost means the mask is
semantically distinct from its surroundings. Instead of a fixed threshold,
a per-scene bank of the lowest observed costs decides the +10/-1 reward.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

REWARD_POS = 10
REWARD_NEG = -1
DEFAULT_BANK_CAPACITY = 20


def build_affinity(features: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """W = clamp(cosine(f_i, f_j), 0) * A, zero diagonal.

    Zero-norm feature rows have similarity 0 everywhere.
    """
    features = np.asarray(features, dtype=np.float64)
    adjacency = np.asarray(adjacency)
    K = features.shape[0]
    if adjacency.shape != (K, K):
        raise ValueError("feature rows and adjacency size disagree")
    norms = np.linalg.norm(features, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = features / safe[:, None]
    unit[norms == 0] = 0.0
    sim = np.clip(unit @ unit.T, 0.0, None)
    W = sim * (adjacency != 0)
    np.fill_diagonal(W, 0.0)
    return W


@dataclass
class CandidateMask:
    ids: frozenset  # superpoint ids in the candidate
    K: int

    def __post_init__(self):
        self.ids = frozenset(int(i) for i in self.ids)
        if not self.ids:
            raise ValueError("empty candidate mask")
        if max(self.ids) >= self.K or min(self.ids) < 0:
            raise ValueError("mask ids out of range")

    def onehot(self) -> np.ndarray:
        o = np.zeros(self.K, dtype=np.float64)
        o[list(self.ids)] = 1.0
        return o


def cut_cost(W: np.ndarray, mask: CandidateMask) -> float:
    """cut/vol with cut = O^T W (1-O) and vol = O^T W 1.

    A mask with zero volume has no affinity support; its cost is +inf.
    """
    W = np.asarray(W, dtype=np.float64)
    o = mask.onehot()
    wo = o @ W
    cut = float(wo @ (1.0 - o))
    vol = float(wo.sum())
    if vol == 0.0:
        return np.inf
    return cut / vol


@dataclass
class CostBank:
    """Sorted store of the lowest cut costs seen for one scene."""

    capacity: int = DEFAULT_BANK_CAPACITY
    costs: list = field(default_factory=list)

    def is_full(self) -> bool:
        return len(self.costs) >= self.capacity

    def max(self) -> float:
        return self.costs[-1] if self.costs else np.inf

    def update_and_reward(self, cost: float) -> int:
        """Insert qualifying costs (evicting the max when full); +10 for
        entrants, -1 otherwise. +inf never enters."""
        if not np.isfinite(cost):
            return REWARD_NEG
        if not self.is_full():
            bisect.insort(self.costs, cost)
            return REWARD_POS
        if cost < self.costs[-1]:
            self.costs.pop()
            bisect.insort(self.costs, cost)
            return REWARD_POS
        return REWARD_NEG

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for c in self.costs:
                f.write(f"{c!r}\n")

    @classmethod
    def load(cls, path: str, capacity: int = DEFAULT_BANK_CAPACITY) -> "CostBank":
        with open(path, "r", encoding="utf-8") as f:
            costs = sorted(float(line) for line in f if line.strip())
        if len(costs) > capacity:
            costs = costs[:capacity]
        return cls(capacity=capacity, costs=costs)


def bank_update_and_reward(bank: CostBank, cost: float):
    """Functional wrapper returning (reward, bank) for the mutating update."""
    return bank.update_and_reward(cost), bank
