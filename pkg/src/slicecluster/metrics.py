"""Counting error and centroid-based detection accuracy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detectsim import format_number


@dataclass
class Matching:
    pairs: list[tuple[int, int, float]]
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0


def mape(estimated_counts, gt_counts) -> float:
    """Mean absolute percentage error of per-volume counts, in percent."""
    est = list(estimated_counts)
    gt = list(gt_counts)
    if len(est) != len(gt):
        raise ValueError(f"length mismatch: {len(est)} estimates vs {len(gt)} ground-truth counts")
    if not gt:
        raise ValueError("need at least one volume")
    if any(g <= 0 for g in gt):
        raise ValueError("ground-truth counts must be positive")
    return 100.0 * math.fsum(abs(e - g) / g for e, g in zip(est, gt)) / len(gt)


def _as_points(points) -> np.ndarray:
    return np.asarray(points, dtype=float).reshape(-1, 3)


def greedy_match(estimated, gt, t_dist: float, spacing=(1.0, 1.0, 1.0)) -> Matching:
    """One-to-one matching: all pairs closer than ``t_dist`` are accepted in
    order of (distance, gt index, est index) unless either end is taken."""
    if not t_dist > 0:
        raise ValueError(f"t_dist must be positive, got {t_dist}")
    est = _as_points(estimated) * np.asarray(spacing, dtype=float)
    ref = _as_points(gt) * np.asarray(spacing, dtype=float)
    pairs = []
    if len(est) and len(ref):
        diff = ref[:, None, :] - est[None, :, :]
        d = np.sqrt((diff ** 2).sum(axis=2))
        gi, ei = np.nonzero(d < t_dist)
        dd = d[gi, ei]
        used_g, used_e = set(), set()
        for k in np.lexsort((ei, gi, dd)):
            g, e = int(gi[k]), int(ei[k])
            if g in used_g or e in used_e:
                continue
            used_g.add(g)
            used_e.add(e)
            pairs.append((g, e, float(dd[k])))
    tp = len(pairs)
    return Matching(pairs, tp, len(est) - tp, len(ref) - tp)


def ap_at(estimated, gt, t: float, spacing=(1.0, 1.0, 1.0)) -> float:
    """Area under the precision/recall step curve with all confidences equal.

    A single operating point (P, R) gives AP = P * R.
    """
    n_est, n_gt = len(_as_points(estimated)), len(_as_points(gt))
    if n_gt == 0:
        if not t > 0:
            raise ValueError(f"t must be positive, got {t}")
        return 1.0 if n_est == 0 else 0.0
    if n_est == 0:
        return 0.0
    m = greedy_match(estimated, gt, t, spacing)
    return m.precision * m.recall


def map_over(estimated, gt, t_set, spacing=(1.0, 1.0, 1.0)) -> float:
    t_set = list(t_set)
    if not t_set:
        raise ValueError("threshold set must be nonempty")
    return math.fsum(ap_at(estimated, gt, t, spacing) for t in t_set) / len(t_set)


def threshold_key(t: float) -> str:
    return str(format_number(t))


@dataclass
class EvalReport:
    mape: float
    ap_by_t: dict[float, float]
    map_score: float
    per_volume: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "mape": self.mape,
            "ap": {threshold_key(t): v for t, v in self.ap_by_t.items()},
            "map": self.map_score,
            "per_volume": self.per_volume,
        }


def evaluate(volumes, t_set, spacing=(1.0, 1.0, 1.0)) -> EvalReport:
    """Score ``[(estimated centroids, gt centroids), ...]`` over several volumes.

    AP at each threshold is averaged over volumes; mAP is the mean over thresholds.
    """
    volumes = list(volumes)
    t_set = sorted(float(t) for t in t_set)
    if not volumes:
        raise ValueError("need at least one volume")
    if not t_set or any(t <= 0 for t in t_set):
        raise ValueError("thresholds must be a nonempty set of positive numbers")
    per_volume = []
    ap_sum = {t: [] for t in t_set}
    for est, gt in volumes:
        est, gt = _as_points(est), _as_points(gt)
        entry = {"n_estimated": len(est), "n_gt": len(gt), "precision": {}, "recall": {}, "ap": {}}
        for t in t_set:
            m = greedy_match(est, gt, t, spacing)
            ap = ap_at(est, gt, t, spacing)
            key = threshold_key(t)
            entry["precision"][key] = m.precision
            entry["recall"][key] = m.recall
            entry["ap"][key] = ap
            ap_sum[t].append(ap)
        per_volume.append(entry)
    ap_by_t = {t: math.fsum(v) / len(v) for t, v in ap_sum.items()}
    score = math.fsum(ap_by_t.values()) / len(ap_by_t)
    return EvalReport(mape([len(e) for e, _ in volumes], [len(g) for _, g in volumes]), ap_by_t, score, per_volume)
