"""Per-point feature encoder.

A 3-layer pointwise network over [xyz - scene centroid, rgb, optional
semantic features]. Stands in for a heavy sparse-conv backbone at desk
scale; its output feeds per-superpoint feature aggregation for the policies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sceneio import Scene
from .tensorkit import Tensor, param

DEFAULT_HIDDEN = 64
DEFAULT_OUT = 32


@dataclass
class PointEncoderParams:
    weights: list  # [W1, b1, W2, b2, W3, b3] as tensorkit params
    in_dim: int
    hidden_dim: int
    out_dim: int

    def tensors(self):
        return self.weights

    def astype(self, dtype):
        return PointEncoderParams(
            weights=[param(w.data.astype(dtype)) for w in self.weights],
            in_dim=self.in_dim, hidden_dim=self.hidden_dim, out_dim=self.out_dim)


def init_point_encoder(in_dim: int, rng: np.random.Generator,
                       hidden_dim: int = DEFAULT_HIDDEN,
                       out_dim: int = DEFAULT_OUT,
                       dtype=np.float32) -> PointEncoderParams:
    def lin(a, b):
        scale = np.sqrt(2.0 / (a + b))
        return [param((rng.standard_normal((a, b)) * scale).astype(dtype)),
                param(np.zeros(b, dtype=dtype))]

    weights = lin(in_dim, hidden_dim) + lin(hidden_dim, hidden_dim) + lin(hidden_dim, out_dim)
    return PointEncoderParams(weights=weights, in_dim=in_dim,
                              hidden_dim=hidden_dim, out_dim=out_dim)


def encoder_input(scene: Scene) -> np.ndarray:
    """Assemble the raw per-point input block (centered xyz, rgb, features)."""
    centered = scene.points - scene.points.mean(axis=0, keepdims=True)
    blocks = [centered, scene.colors]
    if scene.semantic_features is not None:
        blocks.append(scene.semantic_features)
    return np.concatenate(blocks, axis=1)


def encode_forward(x: Tensor, params: PointEncoderParams) -> Tensor:
    """Differentiable forward pass, (n, in_dim) -> (n, out_dim)."""
    if x.shape[1] != params.in_dim:
        raise ValueError(f"input dim {x.shape[1]} != encoder dim {params.in_dim}")
    w1, b1, w2, b2, w3, b3 = params.weights
    h = (x @ w1 + b1).tanh()
    h = (h @ w2 + b2).tanh()
    return h @ w3 + b3


def encode_points(scene: Scene, params: PointEncoderParams) -> np.ndarray:
    """Deterministic per-point features, shape (n_points, out_dim)."""
    x = Tensor(encoder_input(scene).astype(params.weights[0].dtype))
    return encode_forward(x, params).data
