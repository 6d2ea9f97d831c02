"""Lifting of per-slice detections to pseudo-3D points, and pairwise distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..detectsim import DetectionSet
from ..voxelcore import Axis, Point3, slice_uv_mapping


@dataclass(frozen=True)
class PseudoPoint3D:
    position: Point3
    source_axis: Axis
    source_slice: int


def lift(detections: DetectionSet, axis: Axis) -> list[PseudoPoint3D]:
    """Box centers become (u, v); the slice index becomes the third coordinate."""
    axis = Axis.parse(axis)
    m = slice_uv_mapping(axis)
    out = []
    for d in detections.group(axis):
        cu, cv = d.box.center
        xyz = m.to_xyz((cu, cv, float(d.slice_index)))
        out.append(PseudoPoint3D(Point3(*xyz), axis, d.slice_index))
    return out


def positions(points) -> np.ndarray:
    """``(n, 3)`` float array from PseudoPoint3D / Point3 sequences or arrays."""
    if len(points) and isinstance(points[0], PseudoPoint3D):
        points = [p.position for p in points]
    return np.asarray(points, dtype=float).reshape(-1, 3)


def _check_spacing(spacing) -> np.ndarray:
    s = np.asarray((1.0, 1.0, 1.0) if spacing is None else spacing, dtype=float)
    if s.shape != (3,) or not np.all(np.isfinite(s)) or np.any(s <= 0):
        raise ValueError(f"spacing must be three positive numbers, got {spacing!r}")
    return s


def pairwise_distances(points, spacing=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Condensed (upper-triangular, row-major) Euclidean distances after scaling.

    Same layout as :func:`scipy.spatial.distance.pdist`.
    """
    pts = positions(points)
    if not np.all(np.isfinite(pts)):
        raise ValueError("point coordinates must be finite")
    pts = pts * _check_spacing(spacing)
    n = pts.shape[0]
    i, j = np.triu_indices(n, k=1)
    diff = pts[i] - pts[j]
    # explicit component sum: elementwise IEEE ops, identical on every platform
    return np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2)


def n_from_condensed(m: int) -> int:
    n = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    if n * (n - 1) // 2 != m:
        raise ValueError(f"{m} is not a valid condensed distance matrix length")
    return n


def square(distances) -> np.ndarray:
    """Full symmetric matrix from a condensed one (zero diagonal)."""
    d = np.asarray(distances, dtype=float)
    n = n_from_condensed(d.size)
    out = np.zeros((n, n))
    i, j = np.triu_indices(n, k=1)
    out[i, j] = d
    out[j, i] = d
    return out
