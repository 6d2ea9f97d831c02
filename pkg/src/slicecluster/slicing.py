"""2D slices of a labeled volume and their tight per-label ground-truth boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .voxelcore import Axis, BoundingBox2D, LabeledVolume, slice_uv_mapping


@dataclass(frozen=True)
class SliceGtBox:
    axis: Axis
    slice_index: int
    label: int
    box: BoundingBox2D


def extract_slice(volume: LabeledVolume, axis: Axis, p: int) -> np.ndarray:
    """The ``p``-th slice along ``axis`` as a 2D array indexed ``[u, v]``."""
    axis = Axis.parse(axis)
    n = volume.dims.along(axis)
    if not 0 <= p < n:
        raise IndexError(f"slice {p} out of range [0, {n}) along axis {axis.value}")
    m = slice_uv_mapping(axis)
    index = [slice(None)] * 3
    index[m.index] = p
    plane = volume.labels[tuple(index)]
    # remaining axes keep their relative order; u always precedes v
    return plane if m.u < m.v else plane.T


def _boxes_in_plane(plane: np.ndarray, axis: Axis, p: int) -> list[SliceGtBox]:
    out = []
    for i, sl in enumerate(ndimage.find_objects(plane)):
        if sl is None:
            continue
        su, sv = sl
        box = BoundingBox2D(su.start, sv.start, su.stop - 1, sv.stop - 1)
        out.append(SliceGtBox(axis, p, i + 1, box))
    return out


def gt_boxes_for_slice(volume: LabeledVolume, axis: Axis, p: int) -> list[SliceGtBox]:
    """One inclusive tight box per label present in the slice, sorted by label."""
    axis = Axis.parse(axis)
    return _boxes_in_plane(extract_slice(volume, axis, p), axis, p)


def gt_boxes(volume: LabeledVolume, axis: Axis) -> list[SliceGtBox]:
    """All GT boxes along ``axis``, ordered by slice then label."""
    axis = Axis.parse(axis)
    out = []
    for p in range(volume.dims.along(axis)):
        out.extend(gt_boxes_for_slice(volume, axis, p))
    return out
