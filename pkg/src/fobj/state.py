"""Preprocessed per-scene state consumed by trajectory collection.

Everything the agent loop needs is computed once per scene: the superpoint
partition, per-superpoint policy features (aggregated encoder output),
per-superpoint semantic features, the semantic affinity matrix, the cost
bank, and a center-field provider (ground-truth oracle or learned regressor).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .centerfield import CenterRegressorParams, predict_center_field
from .encoder import PointEncoderParams, encode_points
from .geomreward import CenterField, center_field_oracle, instance_centroids
from .sceneio import Scene
from .semreward import CostBank, build_affinity
from .superpoints import SuperpointPartition, aggregate_features, build_partition


@dataclass
class GeoParams:
    radius: float = 0.05
    alpha: float = 0.30
    min_pts: int = 5
    units: str = "metric"


@dataclass
class SceneState:
    scene: Scene
    partition: SuperpointPartition
    features: np.ndarray        # (K, D) policy features
    affinity: np.ndarray        # (K, K) semantic-spatial affinity
    bank: CostBank
    center_provider: object     # callable(points, point_indices) -> CenterField
    geo: GeoParams = field(default_factory=GeoParams)
    sp_points: list = None      # cached per-superpoint point index arrays

    def __post_init__(self):
        if self.sp_points is None:
            self.sp_points = [self.partition.point_indices(k)
                              for k in range(self.partition.K)]

    @property
    def scene_id(self) -> str:
        return self.scene.scene_id

    def candidate_point_indices(self, member_ids) -> np.ndarray:
        return np.concatenate([self.sp_points[k] for k in sorted(member_ids)])


def make_oracle_center_provider(scene: Scene):
    """Ground-truth center field from the scene's instance labels."""
    centroids = instance_centroids(scene.points, scene.gt_instances)

    def provider(points: np.ndarray, point_indices: np.ndarray) -> CenterField:
        return center_field_oracle(points, scene.gt_instances[point_indices],
                                   centroids)

    return provider


def make_regressor_center_provider(params: CenterRegressorParams):

    def provider(points: np.ndarray, point_indices: np.ndarray) -> CenterField:
        return predict_center_field(points, params)

    return provider


def preprocess_scene(scene: Scene, enc_params: PointEncoderParams,
                     center_provider, *, knn: int = 16,
                     color_weight: float = 0.2, k_f: float = 0.05,
                     min_size: int = 20, adjacency_dist: float = 0.1,
                     bank_capacity: int = 20,
                     geo: GeoParams | None = None,
                     partition: SuperpointPartition | None = None) -> SceneState:
    """Build the full per-scene state (partition may be precomputed)."""
    if partition is None:
        partition = build_partition(scene, knn=knn, color_weight=color_weight,
                                    k_f=k_f, min_size=min_size,
                                    adjacency_dist=adjacency_dist)
    per_point = encode_points(scene, enc_params)
    features = aggregate_features(partition.assignment, per_point)
    partition.features = features
    if scene.semantic_features is not None:
        sem = aggregate_features(partition.assignment, scene.semantic_features)
    else:
        sem = features  # fall back to policy features for the affinity
    affinity = build_affinity(sem, partition.adjacency)
    return SceneState(scene=scene, partition=partition, features=features,
                      affinity=affinity, bank=CostBank(capacity=bank_capacity),
                      center_provider=center_provider,
                      geo=geo or GeoParams())
