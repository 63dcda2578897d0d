"""Weighted Lloyd k-means for building compact candidate supports.

Used to quantize raw samples into a measure and to seed free-support
barycenter runs. Supports per-point weights throughout: seeding samples
proportionally to weighted squared distance, and centroid updates use
weighted means.
"""

from __future__ import annotations

import numpy as np

__all__ = ["kmeans"]


def _sq_dists(pts, centers):
    # |x - c|^2 via the quadratic expansion; one GEMM instead of an
    # n x k x d broadcast, which matters for pooled 10k-point clouds.
    d2 = (pts * pts).sum(axis=1)[:, None] + (centers * centers).sum(axis=1)[None, :]
    d2 -= 2.0 * (pts @ centers.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def kmeans(points, k, weights=None, seed=0, max_iter=100):
    """Cluster points into at most k centroids; returns (centroids, labels).

    Seeding picks the first centroid with probability proportional to the
    weights and each further centroid proportionally to weight times
    squared distance to the nearest chosen one. Lloyd iterations then
    alternate weighted-mean updates with nearest-centroid assignment
    (ties to the lowest centroid index). A cluster that loses all its
    weight keeps its current centroid. Exact duplicate centroids are
    merged afterwards, so fewer than k centroids can come back.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    n = pts.shape[0]
    if n < 1:
        raise ValueError("no points to cluster")
    k = int(k)
    if k < 1:
        raise ValueError("k must be at least 1")
    k = min(k, n)
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != n:
            raise ValueError(f"{w.shape[0]} weights for {n} points")
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive total")
        w = w / w.sum()
    rng = np.random.default_rng(seed)

    # k-means++ seeding on the weighted cloud.
    centers = np.empty((k, pts.shape[1]))
    idx = rng.choice(n, p=w)
    centers[0] = pts[idx]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        mass = w * d2
        total = mass.sum()
        if total <= 0:
            # All remaining weight sits on already-chosen centroids.
            centers = centers[:j]
            break
        idx = rng.choice(n, p=mass / total)
        centers[j] = pts[idx]
        d2 = np.minimum(d2, ((pts - centers[j]) ** 2).sum(axis=1))

    for _ in range(max_iter):
        labels = np.argmin(_sq_dists(pts, centers), axis=1)
        new_centers = centers.copy()
        for j in range(centers.shape[0]):
            mask = labels == j
            wj = w[mask].sum()
            if wj > 0:
                new_centers[j] = (w[mask, None] * pts[mask]).sum(axis=0) / wj
        if np.array_equal(new_centers, centers):
            break
        centers = new_centers

    # Merge exact duplicates, first occurrence wins, then final assignment.
    seen: dict[bytes, int] = {}
    keep = []
    for j, c in enumerate(centers):
        key = c.tobytes()
        if key not in seen:
            seen[key] = len(keep)
            keep.append(j)
    centers = centers[keep]
    labels = np.argmin(_sq_dists(pts, centers), axis=1)
    return centers, labels
