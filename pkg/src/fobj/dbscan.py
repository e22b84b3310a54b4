"""Density-based clustering used by the center-consistency check.

Documented semantics (fixed so an independent brute-force reference can
reproduce the labeling exactly):
  - neighborhoods are closed balls and the count includes the point itself;
  - clusters are the connected components of core points under the eps
    relation;
  - border points (non-core with at least one core neighbor) join the
    cluster of their nearest core point, ties broken by lowest core index;
  - clusters are numbered 0.. in order of their lowest core point index;
  - everything else is noise (-1).
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    points = np.asarray(points, dtype=np.float64).reshape(-1, points.shape[-1] if np.ndim(points) > 1 else 1)
    n = len(points)
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels

    tree = cKDTree(points)
    neighborhoods = tree.query_ball_point(points, r=eps)
    counts = np.fromiter((len(nb) for nb in neighborhoods), dtype=np.int64, count=n)
    core = counts >= min_pts

    # connected components over core points, BFS from lowest index
    cluster = -np.ones(n, dtype=np.int64)
    next_label = 0
    for i in range(n):
        if not core[i] or cluster[i] >= 0:
            continue
        cluster[i] = next_label
        queue = [i]
        while queue:
            j = queue.pop()
            for nb in neighborhoods[j]:
                if core[nb] and cluster[nb] < 0:
                    cluster[nb] = next_label
                    queue.append(nb)
        next_label += 1
    labels[core] = cluster[core]

    # borders attach to their nearest core neighbor (tie -> lowest index);
    # squared distances keep the comparison bit-identical to the reference
    for i in range(n):
        if core[i]:
            continue
        best = -1
        best_d2 = np.inf
        for nb in neighborhoods[i]:
            if not core[nb]:
                continue
            diff = points[i] - points[nb]
            d2 = float((diff * diff).sum())
            if d2 < best_d2 or (d2 == best_d2 and nb < best):
                best, best_d2 = nb, d2
        if best >= 0:
            labels[i] = labels[best]
    return labels
