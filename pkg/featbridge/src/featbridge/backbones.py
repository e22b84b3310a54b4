"""Pluggable 2D feature backbones.

A backbone is any callable mapping an (H, W, 3) image to an (h, w, d)
feature map. The built-in choices keep the adapter dependency-free; heavier
pretrained models can be dropped in behind the same callable contract (see
the README for a torchvision example).
"""

from __future__ import annotations

import numpy as np


def color_backbone(rgb: np.ndarray) -> np.ndarray:
    """Identity features: the normalized pixel colors themselves (d=3)."""
    img = np.asarray(rgb, dtype=np.float64)
    if img.dtype != np.float64 or img.max() > 1.5:
        img = img / 255.0
    return img


def gradient_backbone(rgb: np.ndarray) -> np.ndarray:
    """Color plus finite-difference gradient magnitude per channel (d=6)."""
    img = color_backbone(rgb)
    gy, gx = np.gradient(img, axis=(0, 1))
    return np.concatenate([img, np.sqrt(gx * gx + gy * gy)], axis=2)


BACKBONES = {
    "color": color_backbone,
    "gradient": gradient_backbone,
}


def get_backbone(name: str):
    try:
        return BACKBONES[name]
    except KeyError:
        raise ValueError(f"unknown backbone {name!r}; "
                         f"available: {sorted(BACKBONES)}") from None
