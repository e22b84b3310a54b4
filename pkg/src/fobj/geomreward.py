"""Geometric center-consistency reward.

A candidate's per-point offsets should point at a single object centroid:
shifting points by their offsets then collapses the candidate into one dense
cluster. The check normalizes the candidate (centroid to origin, bounding box
to a unit cube) so the clustering radius is in shape-relative units, runs
density clustering on the shifted points, and rewards +10 when the largest
cluster covers at least a fraction alpha of the candidate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dbscan import dbscan

REWARD_POS = 10
REWARD_NEG = -1
DEFAULT_RADIUS = 0.05
DEFAULT_ALPHA = 0.30
DEFAULT_MIN_PTS = 5


@dataclass
class CenterField:
    offsets: np.ndarray  # (n, 3) vectors toward the containing object's centroid

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.offsets)):
            raise ValueError("non-finite offsets")


@dataclass
class GeoVerdict:
    reward: int
    dominant_fraction: float
    n_clusters: int


def center_field_oracle(points: np.ndarray, instance_ids: np.ndarray,
                        centroids: dict[int, np.ndarray]) -> CenterField:
    """Ground-truth offsets: object points aim at their instance centroid,
    background points (id -1) get the zero vector."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    instance_ids = np.asarray(instance_ids).reshape(-1)
    offsets = np.zeros_like(points)
    for inst in np.unique(instance_ids):
        if inst == -1:
            continue
        if inst not in centroids:
            raise KeyError(f"unknown instance id {inst}")
        mask = instance_ids == inst
        offsets[mask] = np.asarray(centroids[inst], dtype=np.float64) - points[mask]
    return CenterField(offsets=offsets)


def instance_centroids(points: np.ndarray, instance_ids: np.ndarray) -> dict[int, np.ndarray]:
    """Mean coordinate per non-background instance."""
    points = np.asarray(points, dtype=np.float64)
    instance_ids = np.asarray(instance_ids)
    out = {}
    for inst in np.unique(instance_ids):
        if inst == -1:
            continue
        out[int(inst)] = points[instance_ids == inst].mean(axis=0)
    return out


def normalize_candidate(points: np.ndarray):
    """Translate the centroid to the origin and scale the bounding box into a
    unit cube. Returns (normalized points, centroid, scale)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    centroid = points.mean(axis=0)
    extent = points.max(axis=0) - points.min(axis=0)
    scale = float(extent.max())
    if scale <= 0.0:
        scale = 1.0  # degenerate candidate: all points coincide
    return (points - centroid) / scale, centroid, scale


def verify_center_consistency(points: np.ndarray, field: CenterField,
                              radius: float = DEFAULT_RADIUS,
                              alpha: float = DEFAULT_ALPHA,
                              min_pts: int = DEFAULT_MIN_PTS,
                              units: str = "metric") -> GeoVerdict:
    """Cluster (points + offsets); +10 when the largest cluster covers at
    least `alpha` of the candidate, else -1.

    With units="metric" the radius is in input coordinates; this keeps
    zero-offset clutter from self-clustering just because the candidate is
    large. units="normalized" rescales the candidate's bounding box to a
    unit cube first, matching the training convention of the learned
    regressor.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(points)
    if n == 0:
        raise ValueError("empty candidate")
    if len(field.offsets) != n:
        raise ValueError("field length mismatch")
    if units == "metric":
        centroid, scale = points.mean(axis=0), 1.0
    elif units == "normalized":
        _, centroid, scale = normalize_candidate(points)
    else:
        raise ValueError(f"unknown units {units!r}")
    shifted = (points + field.offsets - centroid) / scale
    labels = dbscan(shifted, eps=radius, min_pts=min_pts)
    clustered = labels[labels >= 0]
    if clustered.size:
        sizes = np.bincount(clustered)
        dominant = float(sizes.max()) / n
        n_clusters = len(sizes)
    else:
        dominant = 0.0
        n_clusters = 0
    reward = REWARD_POS if dominant >= alpha else REWARD_NEG
    return GeoVerdict(reward=reward, dominant_fraction=dominant, n_clusters=n_clusters)
