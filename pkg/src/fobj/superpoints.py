"""Superpoint construction: kNN graph, graph-based segmentation, adjacency.

The segmentation is the classic union-find merging criterion (merge two
components when the connecting edge weight does not exceed either component's
internal difference plus k_f/size), run over a point-cloud kNN graph whose
edge weights mix spatial and color distance. A post-pass absorbs components
below min_size. Edges are processed in (weight, i, j) order so results do not
depend on input edge order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .sceneio import Scene

DEFAULT_KNN = 16
DEFAULT_COLOR_WEIGHT = 0.2   # meters of edge weight per unit RGB distance
DEFAULT_KF = 0.05
DEFAULT_MIN_SIZE = 20
DEFAULT_ADJACENCY_DIST = 0.1


@dataclass
class SuperpointPartition:
    assignment: np.ndarray  # (n,) int32 superpoint index in [0, K)
    K: int
    centroids: np.ndarray   # (K, 3) float64 mean coordinates
    adjacency: np.ndarray   # (K, K) uint8, symmetric, zero diagonal
    features: np.ndarray | None = None  # (K, d) per-superpoint mean features

    def point_indices(self, k: int) -> np.ndarray:
        return np.nonzero(self.assignment == k)[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K)


def build_knn_graph(scene: Scene, k: int, color_weight: float = DEFAULT_COLOR_WEIGHT):
    """Undirected, deduplicated kNN edges (i, j, w), i < j.

    w = euclidean(xyz_i, xyz_j) + color_weight * euclidean(rgb_i, rgb_j).
    """
    n = scene.n_points
    if n == 0:
        raise ValueError("empty scene")
    if k < 1:
        raise ValueError("k must be >= 1")
    if n == 1:
        return np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.float64)
    kq = min(k + 1, n)  # query includes the point itself
    tree = cKDTree(scene.points)
    _, nbr = tree.query(scene.points, k=kq)
    src = np.repeat(np.arange(n), kq - 1)
    dst = nbr[:, 1:].reshape(-1)
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
    p = scene.points.astype(np.float64)
    c = scene.colors.astype(np.float64)
    d_xyz = np.linalg.norm(p[pairs[:, 0]] - p[pairs[:, 1]], axis=1)
    d_rgb = np.linalg.norm(c[pairs[:, 0]] - c[pairs[:, 1]], axis=1)
    return pairs, d_xyz + color_weight * d_rgb


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n)
        self.size = np.ones(n, dtype=np.int64)

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:  # path compression
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        return a


def felzenszwalb_segment(edges, weights, n_points: int, k_f: float = DEFAULT_KF,
                         min_size: int = DEFAULT_MIN_SIZE) -> np.ndarray:
    """Graph-based segmentation; returns per-point labels 0..K-1.

    Ties between equal-weight edges break by (i, j), so any presentation
    order of the same edge set yields the same labeling.
    """
    if k_f <= 0:
        raise ValueError("k_f must be > 0")
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    order = np.lexsort((edges[:, 1], edges[:, 0], weights))
    edges, weights = edges[order], weights[order]

    uf = _UnionFind(n_points)
    # threshold[c] = internal difference of c + k_f / |c|
    threshold = np.full(n_points, k_f, dtype=np.float64)
    for (a, b), w in zip(edges, weights):
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            continue
        if w <= threshold[ra] and w <= threshold[rb]:
            r = uf.union(ra, rb)
            threshold[r] = w + k_f / uf.size[r]

    # absorb undersized components along the cheapest available edges
    for (a, b), w in zip(edges, weights):
        ra, rb = uf.find(a), uf.find(b)
        if ra != rb and (uf.size[ra] < min_size or uf.size[rb] < min_size):
            uf.union(ra, rb)

    roots = np.fromiter((uf.find(i) for i in range(n_points)), dtype=np.int64,
                        count=n_points)
    _, labels = np.unique(roots, return_inverse=True)
    # renumber by first occurrence so labels are stable
    first = {}
    remap = np.empty(labels.max() + 1, dtype=np.int32)
    nxt = 0
    for lab in labels:
        if lab not in first:
            first[lab] = nxt
            remap[lab] = nxt
            nxt += 1
    return remap[labels].astype(np.int32)


def compute_adjacency(assignment: np.ndarray, points: np.ndarray,
                      d: float = DEFAULT_ADJACENCY_DIST) -> np.ndarray:
    """A_ij = 1 iff the closest point pair of superpoints i, j is within d.

    Uses a grid hash at cell size d: any pair within d lies in the same or a
    neighboring cell, so scanning the 3x3x3 neighborhood is exact.
    """
    if d <= 0:
        raise ValueError("d must be > 0")
    assignment = np.asarray(assignment)
    K = int(assignment.max()) + 1 if len(assignment) else 0
    adj = np.zeros((K, K), dtype=np.uint8)
    if K <= 1:
        return adj
    pts = np.asarray(points, dtype=np.float64)
    cells = np.floor(pts / d).astype(np.int64)
    uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
    buckets: dict[tuple, np.ndarray] = {
        tuple(uniq[i]): order[bounds[i]:bounds[i + 1]] for i in range(len(uniq))
    }
    # visit each unordered cell pair once; symmetrized below
    offsets = [(0, 0, 0)] + [o for o in
               ((dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
                for dz in (-1, 0, 1)) if o > (0, 0, 0)]
    d2 = d * d
    for key, idx_a in buckets.items():
        for off in offsets:
            nb = (key[0] + off[0], key[1] + off[1], key[2] + off[2])
            idx_b = buckets.get(nb)
            if idx_b is None:
                continue
            diff = pts[idx_a][:, None, :] - pts[idx_b][None, :, :]
            close = (diff * diff).sum(axis=2) <= d2
            ia, ib = np.nonzero(close)
            sa = assignment[idx_a[ia]]
            sb = assignment[idx_b[ib]]
            keep = sa != sb
            adj[sa[keep], sb[keep]] = 1
    adj = np.maximum(adj, adj.T)
    np.fill_diagonal(adj, 0)
    return adj


def aggregate_features(assignment: np.ndarray, per_point: np.ndarray) -> np.ndarray:
    """Per-superpoint arithmetic mean of per-point feature rows."""
    assignment = np.asarray(assignment)
    per_point = np.asarray(per_point)
    K = int(assignment.max()) + 1
    sums = np.zeros((K, per_point.shape[1]), dtype=np.float64)
    np.add.at(sums, assignment, per_point.astype(np.float64))
    counts = np.bincount(assignment, minlength=K).astype(np.float64)
    return (sums / counts[:, None]).astype(per_point.dtype)


def build_partition(scene: Scene, knn: int = DEFAULT_KNN,
                    color_weight: float = DEFAULT_COLOR_WEIGHT,
                    k_f: float = DEFAULT_KF, min_size: int = DEFAULT_MIN_SIZE,
                    adjacency_dist: float = DEFAULT_ADJACENCY_DIST) -> SuperpointPartition:
    """Full superpoint pipeline for one scene (segments + adjacency + centroids)."""
    if scene.n_points < min_size:
        assignment = np.zeros(scene.n_points, dtype=np.int32)
    else:
        edges, weights = build_knn_graph(scene, knn, color_weight)
        assignment = felzenszwalb_segment(edges, weights, scene.n_points, k_f, min_size)
    K = int(assignment.max()) + 1
    centroids = aggregate_features(assignment, scene.points.astype(np.float64))
    adjacency = compute_adjacency(assignment, scene.points, adjacency_dist)
    return SuperpointPartition(assignment=assignment, K=K, centroids=centroids,
                               adjacency=adjacency)
