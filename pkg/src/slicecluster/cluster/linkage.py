"""Average-linkage agglomerative clustering via the Lance-Williams recurrence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .points import n_from_condensed, square


@dataclass(frozen=True)
class LinkageScheme:
    """Lance-Williams coefficients for one merge of clusters of sizes n_i, n_j."""

    alpha_i: float
    alpha_j: float
    beta: float = 0.0
    gamma: float = 0.0

    @classmethod
    def average(cls, n_i: int, n_j: int) -> "LinkageScheme":
        total = n_i + n_j
        return cls(n_i / total, n_j / total, 0.0, 0.0)

    def update(self, l_ie, l_je, l_ij=0.0):
        """Dissimilarity of the merged cluster to external cluster(s) e."""
        out = self.alpha_i * l_ie + self.alpha_j * l_je
        if self.beta:
            out = out + self.beta * l_ij
        if self.gamma:
            out = out + self.gamma * np.abs(l_ie - l_je)
        return out


@dataclass(frozen=True)
class Dendrogram:
    """Merge tree. Leaves are ids ``0..n-1``; merge ``m`` creates id ``n + m``.

    ``merges`` is an ``(n-1, 4)`` array of rows ``(id_a, id_b, height, size)``
    with ``id_a < id_b``.
    """

    n_points: int
    merges: np.ndarray

    @property
    def heights(self) -> np.ndarray:
        return self.merges[:, 2]

    def children(self, m: int) -> tuple[int, int]:
        return int(self.merges[m, 0]), int(self.merges[m, 1])

    def as_tuples(self) -> list[tuple[int, int, float, int]]:
        return [(int(a), int(b), float(h), int(s)) for a, b, h, s in self.merges]


def _row_min(row: np.ndarray, cid: np.ndarray) -> tuple[int, float]:
    """Slot with the minimum entry of ``row``; ties go to the smallest cluster id."""
    best = row.min()
    hits = np.flatnonzero(row == best)
    if hits.size > 1:
        return int(hits[np.argmin(cid[hits])]), float(best)
    return int(hits[0]), float(best)


def ahc_average_linkage(distances) -> Dendrogram:
    """Greedy average-linkage AHC on a condensed distance matrix.

    Each step merges the active pair with the smallest dissimilarity (ties:
    lexicographically smallest ``(id_a, id_b)``) and updates the merged
    cluster's dissimilarities with the Lance-Williams recurrence. Every slot
    caches its nearest neighbour; under average linkage a merged cluster is
    never strictly closer to a third cluster than both its parts, so only rows
    that pointed at the merged pair need a rescan.
    """
    d = np.asarray(distances, dtype=float)
    n = n_from_condensed(d.size)
    if n == 1:
        return Dendrogram(1, np.empty((0, 4)))
    D = square(d)
    np.fill_diagonal(D, np.inf)
    size = np.ones(n, dtype=np.int64)
    cid = np.arange(n)
    active = np.ones(n, dtype=bool)
    # slot order equals id order initially, so argmin's first hit is the tie-break
    nn = D.argmin(axis=1)
    mind = D[np.arange(n), nn]
    merges = np.empty((n - 1, 4))

    for m in range(n - 1):
        live = np.flatnonzero(active)
        row_best = mind[live]
        best = row_best.min()
        cand = live[row_best == best]
        if cand.size > 1:
            keys = [(min(cid[s], cid[nn[s]]), max(cid[s], cid[nn[s]])) for s in cand]
            s = int(cand[min(range(len(keys)), key=keys.__getitem__)])
        else:
            s = int(cand[0])
        p, q = s, int(nn[s])
        if cid[p] > cid[q]:
            p, q = q, p
        merges[m] = (cid[p], cid[q], best, size[p] + size[q])

        scheme = LinkageScheme.average(int(size[p]), int(size[q]))
        others = active.copy()
        others[[p, q]] = False
        cols = np.flatnonzero(others)
        new = scheme.update(D[p, cols], D[q, cols], best)
        D[p, cols] = new
        D[cols, p] = new
        D[q, :] = np.inf
        D[:, q] = np.inf
        active[q] = False
        size[p] += size[q]
        cid[p] = n + m

        if cols.size == 0:
            break
        # guard against the weighted mean rounding below a cached minimum
        closer = new < mind[cols]
        if closer.any():
            nn[cols[closer]] = p
            mind[cols[closer]] = new[closer]
        stale = cols[(nn[cols] == q) | ((nn[cols] == p) & ~closer)]
        for r in stale:
            nn[r], mind[r] = _row_min(D[r], cid)
        nn[p], mind[p] = _row_min(D[p], cid)
        mind[q] = np.inf

    return Dendrogram(n, merges)


def _find(parent: np.ndarray, i: int) -> int:
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def cut(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Labels ``0..k-1`` after undoing the last ``k-1`` merges.

    Clusters are numbered in order of their smallest member index.
    """
    n = dendrogram.n_points
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    parent = np.arange(2 * n - 1)
    for m in range(n - k):
        a, b = dendrogram.children(m)
        parent[a] = n + m
        parent[b] = n + m
    roots = np.array([_find(parent, i) for i in range(n)])
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    # relabel by first occurrence
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[inverse]


def leaf_order(dendrogram: Dendrogram) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Leaf ordering in which every node's members are contiguous.

    Returns ``(order, start, size)``; members of node ``c`` are
    ``order[start[c]:start[c] + size[c]]``.
    """
    n = dendrogram.n_points
    total = 2 * n - 1
    size = np.ones(total, dtype=np.int64)
    if n > 1:
        size[n:] = dendrogram.merges[:, 3].astype(np.int64)
    start = np.zeros(total, dtype=np.int64)
    for m in range(n - 2, -1, -1):
        a, b = dendrogram.children(m)
        start[a] = start[n + m]
        start[b] = start[n + m] + size[a]
    order = np.empty(n, dtype=np.int64)
    order[start[:n]] = np.arange(n)
    return order, start, size
