"""Silhouette scores and the k sweep over a dendrogram.

Two variants of the separation term b(i):

* ``"mean"``: mean over all other clusters of the mean distance from i to that
  cluster;
* ``"nearest"``: the conventional minimum over other clusters.

Singleton clusters contribute s(i) = 0, and s(i) = 0 whenever a(i) = b(i) = 0.
"""

from __future__ import annotations

import numpy as np

from .linkage import Dendrogram, leaf_order
from .points import square

VARIANTS = ("mean", "nearest")


def _check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValueError(f"unknown silhouette variant {variant!r}; expected one of {VARIANTS}")
    return variant


def _scores(intra, own_size, mean_to, k, variant, total_mean=None):
    """Per-point silhouette from cluster-sum statistics.

    ``intra``: sum of distances to the own cluster; ``mean_to``: (n, k) mean
    distance to each cluster (only needed for the nearest variant);
    ``total_mean``: sum over all clusters of the per-cluster mean distance.
    """
    multi = own_size > 1
    a = np.where(multi, intra / np.maximum(own_size - 1, 1), 0.0)
    if variant == "mean":
        b = (total_mean - intra / own_size) / (k - 1)
    else:
        b = mean_to.min(axis=1)
    denom = np.maximum(a, b)
    ok = multi & (denom > 0)
    s = np.zeros_like(a)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    return s


def silhouette(distances, labels, variant: str = "mean") -> float:
    """Mean silhouette of a labeling ``0..k-1`` (k >= 2) over a condensed distance matrix."""
    _check_variant(variant)
    labels = np.asarray(labels, dtype=np.int64)
    D = square(distances)
    n = D.shape[0]
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got {labels.shape}")
    k = int(labels.max()) + 1 if n else 0
    counts = np.bincount(labels, minlength=k)
    if n < 2 or k < 2:
        raise ValueError("silhouette is undefined for fewer than two clusters")
    if np.any(counts == 0):
        raise ValueError("labels must cover 0..k-1 with every cluster nonempty")
    order = np.argsort(labels, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(counts)[:-1]])
    sums = np.add.reduceat(D[:, order], bounds, axis=1)  # (n, k)
    idx = np.arange(n)
    intra = sums[idx, labels]
    own = counts[labels]
    mean_to = sums / counts
    mean_to_other = mean_to.copy()
    mean_to_other[idx, labels] = np.inf
    s = _scores(intra, own, mean_to_other, k, variant, total_mean=mean_to.sum(axis=1))
    return float(s.mean())


def silhouette_sweep(dendrogram: Dendrogram, distances, k_min: int, k_max: int, variant: str = "mean") -> dict[int, float]:
    """Silhouette of every dendrogram cut with k in [k_min, k_max].

    Walks the tree top-down: going from k to k+1 clusters splits the node of the
    (n-k)-th merge into its two children, so only the smaller child's distance
    column sums are computed afresh. Cost O(n * sum of split sizes), instead of
    O(n^2) per k.
    """
    _check_variant(variant)
    n = dendrogram.n_points
    if not 2 <= k_min <= k_max <= n:
        raise ValueError(f"need 2 <= k_min <= k_max <= n_points ({n}), got [{k_min}, {k_max}]")
    D = square(distances)
    order, start, size = leaf_order(dendrogram)
    root = 2 * n - 2

    def members(node):
        return order[start[node]:start[node] + size[node]]

    slot = np.zeros(n, dtype=np.int64)
    S = np.empty((n, k_max))
    S[:, 0] = D.sum(axis=1)
    counts = np.zeros(k_max, dtype=np.int64)
    counts[0] = n
    node_slot = {root: 0}
    total_mean = S[:, 0] / n
    idx = np.arange(n)
    out = {}
    for k in range(2, k_max + 1):
        m = n - k  # merge undone when going from k-1 to k clusters
        parent = n + m
        ps = node_slot.pop(parent)
        a, b = (int(c) for c in dendrogram.merges[m, :2])
        small, big = (a, b) if size[a] <= size[b] else (b, a)
        new = k - 1
        pts = members(small)
        slot[pts] = new
        col_small = D[:, pts].sum(axis=1)
        total_mean -= S[:, ps] / counts[ps]
        S[:, ps] -= col_small
        S[:, new] = col_small
        counts[ps] = size[big]
        counts[new] = size[small]
        node_slot[big] = ps
        node_slot[small] = new
        total_mean += S[:, ps] / counts[ps] + S[:, new] / counts[new]
        if k < k_min:
            continue
        intra = S[idx, slot]
        own = counts[slot]
        mean_to = None
        if variant == "nearest":
            mean_to = S[:, :k] / counts[:k]
            mean_to[idx, slot] = np.inf
        out[k] = float(_scores(intra, own, mean_to, k, variant, total_mean=total_mean).mean())
    return out
