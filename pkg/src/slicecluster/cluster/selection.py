"""Cluster-count selection, per-axis clustering and 3-way majority voting."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

import numpy as np

from ..detectsim import DetectionSet
from ..voxelcore import AXES, Axis
from .linkage import Dendrogram, ahc_average_linkage, cut
from .points import lift, pairwise_distances, positions
from .silhouette import silhouette_sweep


class ClusteringError(ValueError):
    def __init__(self, message: str, axis: Axis | None = None):
        self.axis = axis
        prefix = f"axis {axis.value}: " if axis is not None else ""
        super().__init__(prefix + message)


@dataclass
class ClusterResult:
    k: int
    centroids: np.ndarray
    silhouette: float | None = None
    labels: np.ndarray | None = None
    axis: Axis | None = None

    def to_json(self) -> dict:
        doc = {}
        if self.axis is not None:
            doc["axis"] = self.axis.value
        doc["k"] = int(self.k)
        doc["silhouette"] = self.silhouette
        doc["centroids"] = [[float(v) for v in c] for c in self.centroids]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ClusterResult":
        cents = np.asarray(doc.get("centroids", []), dtype=float).reshape(-1, 3)
        axis = Axis.parse(doc["axis"]) if doc.get("axis") else None
        k = int(doc.get("k", len(cents)))
        if k != len(cents):
            raise ValueError(f"cluster result has k={k} but {len(cents)} centroids")
        return cls(k, cents, doc.get("silhouette"), None, axis)


@dataclass
class FusionResult:
    centroids: np.ndarray
    support: list[frozenset] = field(default_factory=list)
    k: int | None = None
    silhouette: float | None = None

    @property
    def count(self) -> int:
        return len(self.centroids)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "count": self.count,
            "silhouette": self.silhouette,
            "centroids": [[float(v) for v in c] for c in self.centroids],
            "support": [[a.value for a in AXES if a in s] for s in self.support],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FusionResult":
        cents = np.asarray(doc.get("centroids", []), dtype=float).reshape(-1, 3)
        support = [frozenset(Axis.parse(a) for a in s) for s in doc.get("support", [])]
        if len(support) != len(cents):
            raise ValueError("fusion result needs one support entry per centroid")
        return cls(cents, support, doc.get("k"), doc.get("silhouette"))


def cluster_means(points: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Per-cluster mean; exactly rounded sums so results do not depend on summation order."""
    out = np.empty((k, 3))
    for c in range(k):
        members = points[labels == c]
        out[c] = [math.fsum(col) / members.shape[0] for col in members.T.tolist()]
    return out


def select_k(dendrogram: Dendrogram, distances, k_range, points=None, variant: str = "mean") -> ClusterResult:
    """Pick the cut with the highest silhouette in ``k_range`` (ties: smallest k)."""
    k_min, k_max = (int(v) for v in k_range)
    n = dendrogram.n_points
    if n < 2:
        raise ClusteringError("need at least two points to select a cluster count")
    if not 2 <= k_min <= k_max <= n:
        raise ClusteringError(f"invalid k range [{k_min}, {k_max}] for {n} points")
    scores = silhouette_sweep(dendrogram, distances, k_min, k_max, variant)
    best_k = max(scores, key=lambda k: (scores[k], -k))
    labels = cut(dendrogram, best_k)
    cents = cluster_means(positions(points), labels, best_k) if points is not None else np.empty((0, 3))
    return ClusterResult(best_k, cents, scores[best_k], labels)


def clip_k_range(k_range, n: int) -> tuple[int, int]:
    """Clamp a requested range into [2, n]; ``None`` means the full range."""
    if k_range is None:
        return 2, n
    k_min, k_max = (int(v) for v in k_range)
    k_max = max(2, min(k_max, n))
    k_min = min(max(2, k_min), k_max)
    return k_min, k_max


def cluster_axis(detections: DetectionSet, axis: Axis, spacing=(1.0, 1.0, 1.0), k_range=None,
                 variant: str = "mean") -> ClusterResult:
    """Lift one axis's detections, build the dendrogram and choose k.

    Spacing only scales distances; centroids stay in voxel coordinates.
    """
    axis = Axis.parse(axis)
    pts = positions(lift(detections, axis))
    if pts.shape[0] < 2:
        raise ClusteringError(f"need at least 2 detections to cluster, found {pts.shape[0]}", axis)
    dist = pairwise_distances(pts, spacing)
    dendro = ahc_average_linkage(dist)
    result = select_k(dendro, dist, clip_k_range(k_range, pts.shape[0]), pts, variant)
    result.axis = axis
    return result


def fuse_axes(results, margin: int = 5, spacing=(1.0, 1.0, 1.0), variant: str = "mean") -> FusionResult:
    """3-way majority voting: cluster the pooled per-axis centroids again and keep
    clusters supported by at least two distinct axes.

    ``results`` is a sequence of axis-tagged :class:`ClusterResult`. With a
    single result its centroids pass through unchanged.
    """
    results = list(results)
    if not results:
        raise ClusteringError("fusion needs at least one cluster result")
    if any(r.axis is None for r in results):
        raise ClusteringError("every fused cluster result must carry its axis")
    if len({r.axis for r in results}) != len(results):
        raise ClusteringError("duplicate axes in fusion input")
    if len(results) == 1:
        r = results[0]
        cents = np.asarray(r.centroids, dtype=float).reshape(-1, 3)
        return FusionResult(cents, [frozenset({r.axis})] * len(cents), r.k, r.silhouette)

    pooled = np.concatenate([np.asarray(r.centroids, dtype=float).reshape(-1, 3) for r in results])
    tags = [r.axis for r in results for _ in range(len(r.centroids))]
    n = pooled.shape[0]
    if n < 2:
        return FusionResult(np.empty((0, 3)), [], None, None)
    med = statistics.median_low(len(r.centroids) for r in results)
    k_min, k_max = max(2, med - margin), med + margin
    k_max = max(2, min(k_max, n))
    k_min = min(k_min, k_max)
    dist = pairwise_distances(pooled, spacing)
    chosen = select_k(ahc_average_linkage(dist), dist, (k_min, k_max), pooled, variant)
    keep_c, keep_s = [], []
    for c in range(chosen.k):
        support = frozenset(tags[i] for i in np.flatnonzero(chosen.labels == c))
        if len(support) >= 2:
            keep_c.append(chosen.centroids[c])
            keep_s.append(support)
    cents = np.asarray(keep_c, dtype=float).reshape(-1, 3)
    return FusionResult(cents, keep_s, chosen.k, chosen.silhouette)
