"""Per-slice 2D detections: noise simulator, JSON-lines I/O and NMS.

The simulator stands in for a learned slice detector. Real detector output
enters the pipeline through :func:`load_detections`.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .slicing import SliceGtBox
from .voxelcore import AXES, Axis, BoundingBox2D, SeededRng, VolumeDims


@dataclass(frozen=True)
class Detection2D:
    axis: Axis
    slice_index: int
    box: BoundingBox2D
    score: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.score <= 1.0):
            raise ValueError(f"score must be in (0, 1], got {self.score}")
        if self.slice_index < 0:
            raise ValueError(f"negative slice index {self.slice_index}")

    def sort_key(self):
        return (self.slice_index, self.box.u_min, self.box.v_min, self.box.u_max, self.box.v_max, -self.score)


class DetectionSet:
    """Detections grouped by axis; each group kept in canonical order."""

    def __init__(self, detections: Iterable[Detection2D] = ()):
        groups: dict[Axis, list[Detection2D]] = {}
        for d in detections:
            groups.setdefault(d.axis, []).append(d)
        self._groups = {a: tuple(sorted(groups[a], key=Detection2D.sort_key)) for a in AXES if a in groups}

    @property
    def axes(self) -> tuple[Axis, ...]:
        return tuple(self._groups)

    def group(self, axis: Axis) -> tuple[Detection2D, ...]:
        return self._groups.get(Axis.parse(axis), ())

    def __iter__(self):
        for a in self._groups:
            yield from self._groups[a]

    def __len__(self):
        return sum(len(g) for g in self._groups.values())

    def __eq__(self, other):
        if not isinstance(other, DetectionSet):
            return NotImplemented
        return self._groups == other._groups

    def __repr__(self):
        sizes = ", ".join(f"{a.value}={len(g)}" for a, g in self._groups.items())
        return f"DetectionSet({sizes})"

    def only(self, axis: Axis) -> "DetectionSet":
        return DetectionSet(self.group(axis))

    @classmethod
    def from_gt(cls, gt_boxes: Iterable[SliceGtBox]) -> "DetectionSet":
        return cls(Detection2D(b.axis, b.slice_index, b.box, 1.0) for b in gt_boxes)


@dataclass(frozen=True)
class NoiseModel:
    sigma_center: float = 0.0
    sigma_size: float = 0.0
    p_miss: float = 0.0
    fp_rate: float = 0.0
    fp_size_range: tuple[float, float] = (8.0, 24.0)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "fp_size_range", tuple(float(s) for s in self.fp_size_range))
        vals = (self.sigma_center, self.sigma_size, self.p_miss, self.fp_rate, *self.fp_size_range)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("noise parameters must be finite")
        if self.sigma_center < 0 or self.sigma_size < 0 or self.fp_rate < 0:
            raise ValueError("sigmas and fp_rate must be >= 0")
        if not 0.0 <= self.p_miss <= 1.0:
            raise ValueError(f"p_miss must be in [0, 1], got {self.p_miss}")
        s_min, s_max = self.fp_size_range
        if not 0 <= s_min <= s_max:
            raise ValueError(f"invalid fp_size_range {self.fp_size_range}")


AXIS_TAG = {Axis.X: ord("x"), Axis.Y: ord("y"), Axis.Z: ord("z")}


def _clamped_box(cu, cv, hu, hv, u_len, v_len) -> BoundingBox2D:
    # clamp to the pixel-center range of the slice; keep the box valid when the
    # jittered center drifts outside
    u0 = min(max(cu - hu, 0.0), u_len - 1)
    u1 = min(max(cu + hu, 0.0), u_len - 1)
    v0 = min(max(cv - hv, 0.0), v_len - 1)
    v1 = min(max(cv + hv, 0.0), v_len - 1)
    return BoundingBox2D(u0, v0, u1, v1)


def _simulate_axis(boxes: list[SliceGtBox], axis: Axis, noise: NoiseModel, dims: VolumeDims) -> list[Detection2D]:
    rng = SeededRng(noise.seed ^ AXIS_TAG[axis])
    u_len, v_len = dims.slice_shape(axis)
    by_slice: dict[int, list[SliceGtBox]] = {}
    for b in boxes:
        by_slice.setdefault(b.slice_index, []).append(b)
    out = []
    s_min, s_max = noise.fp_size_range
    for p in range(dims.along(axis)):
        for g in sorted(by_slice.get(p, ()), key=lambda b: (b.label, b.box.as_tuple())):
            # fixed draw count per box keeps the stream aligned across parameter changes
            drop = rng.random() < noise.p_miss
            du, dv, dhu, dhv = rng.normal(0.0, 1.0, size=4)
            if drop:
                continue
            cu, cv = g.box.center
            hu = (g.box.u_max - g.box.u_min) / 2.0
            hv = (g.box.v_max - g.box.v_min) / 2.0
            if noise.sigma_center > 0:
                cu += noise.sigma_center * du
                cv += noise.sigma_center * dv
            if noise.sigma_size > 0:
                hu = max(hu + noise.sigma_size * dhu, min(hu, 0.5))
                hv = max(hv + noise.sigma_size * dhv, min(hv, 0.5))
            out.append(Detection2D(axis, p, _clamped_box(cu, cv, hu, hv, u_len, v_len), 1.0))
        n_fp = int(rng.poisson(noise.fp_rate)) if noise.fp_rate > 0 else 0
        for _ in range(n_fp):
            cu = rng.uniform(0.0, u_len - 1)
            cv = rng.uniform(0.0, v_len - 1)
            su, sv = rng.uniform(s_min, s_max, size=2)
            out.append(Detection2D(axis, p, _clamped_box(cu, cv, su / 2, sv / 2, u_len, v_len), 1.0))
    return out


def simulate_detections(gt_boxes: Iterable[SliceGtBox], noise: NoiseModel, dims, axes=None) -> DetectionSet:
    """Corrupt GT boxes with misses, jitter and Poisson false positives.

    ``axes`` defaults to the axes present in ``gt_boxes``. Every axis draws from
    its own stream (``seed ^ axis tag``) so axes are independent of each other.
    """
    dims = VolumeDims.of(dims)
    gt_boxes = list(gt_boxes)
    if axes is None:
        axes = {b.axis for b in gt_boxes}
    axes = [a for a in AXES if a in {Axis.parse(x) for x in axes}]
    dets = []
    for axis in axes:
        dets.extend(_simulate_axis([b for b in gt_boxes if b.axis == axis], axis, noise, dims))
    return DetectionSet(dets)


def iou(a: BoundingBox2D, b: BoundingBox2D) -> float:
    """IoU with inclusive pixel extents (width = max - min + 1)."""
    iw = min(a.u_max, b.u_max) - max(a.u_min, b.u_min) + 1
    ih = min(a.v_max, b.v_max) - max(a.v_min, b.v_min) + 1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a.u_max - a.u_min + 1) * (a.v_max - a.v_min + 1)
    area_b = (b.u_max - b.u_min + 1) * (b.v_max - b.v_min + 1)
    return inter / (area_a + area_b - inter)


def nms(detections: DetectionSet, iou_threshold: float) -> DetectionSet:
    """Greedy per-(axis, slice) suppression of boxes with IoU > threshold."""
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    kept = []
    for axis in detections.axes:
        by_slice: dict[int, list[Detection2D]] = {}
        for d in detections.group(axis):
            by_slice.setdefault(d.slice_index, []).append(d)
        for group in by_slice.values():
            # stable sort: equal scores keep canonical order
            order = sorted(group, key=lambda d: -d.score)
            chosen: list[Detection2D] = []
            for d in order:
                if all(iou(d.box, c.box) <= iou_threshold for c in chosen):
                    chosen.append(d)
            kept.extend(chosen)
    return DetectionSet(kept)


# -- JSON-lines interchange ----------------------------------------------------

class DetectionParseError(ValueError):
    def __init__(self, line: int, field: str, message: str):
        self.line = line
        self.field = field
        super().__init__(f"line {line}: field {field!r}: {message}")


def format_number(x: float):
    """Shortest round-trip form; integral values are written without a fraction."""
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return int(x)
    return x


def detection_to_json(d: Detection2D) -> str:
    doc = {
        "axis": d.axis.value,
        "slice": d.slice_index,
        "box": [format_number(v) for v in d.box.as_tuple()],
        "score": float(d.score),
    }
    return json.dumps(doc, separators=(",", ":"))


def save_detections(detections: DetectionSet, stream) -> None:
    for d in detections:
        stream.write(detection_to_json(d) + "\n")


def dumps_detections(detections: DetectionSet) -> str:
    buf = io.StringIO()
    save_detections(detections, buf)
    return buf.getvalue()


def _parse_record(doc, lineno: int, dims: VolumeDims | None) -> Detection2D:
    if not isinstance(doc, dict):
        raise DetectionParseError(lineno, "<record>", "expected a JSON object")
    for key in ("axis", "slice", "box"):
        if key not in doc:
            raise DetectionParseError(lineno, key, "missing")
    try:
        axis = Axis.parse(doc["axis"])
    except ValueError as e:
        raise DetectionParseError(lineno, "axis", str(e)) from None
    p = doc["slice"]
    if isinstance(p, bool) or not isinstance(p, (int, float)) or int(p) != p or p < 0:
        raise DetectionParseError(lineno, "slice", f"expected a non-negative integer, got {p!r}")
    p = int(p)
    if dims is not None and p >= dims.along(axis):
        raise DetectionParseError(lineno, "slice", f"{p} outside [0, {dims.along(axis)}) on axis {axis.value}")
    box = doc["box"]
    if not isinstance(box, list) or len(box) != 4 or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in box
    ):
        raise DetectionParseError(lineno, "box", f"expected four finite numbers, got {box!r}")
    u0, v0, u1, v1 = (float(v) for v in box)
    if u0 > u1:
        raise DetectionParseError(lineno, "box.u_min", f"u_min {u0} > u_max {u1}")
    if v0 > v1:
        raise DetectionParseError(lineno, "box.v_min", f"v_min {v0} > v_max {v1}")
    score = doc.get("score", 1.0)
    if isinstance(score, bool) or not isinstance(score, (int, float)) or not 0.0 < score <= 1.0:
        raise DetectionParseError(lineno, "score", f"expected a number in (0, 1], got {score!r}")
    return Detection2D(axis, p, BoundingBox2D(u0, v0, u1, v1), float(score))


def load_detections(stream, dims=None) -> DetectionSet:
    """Parse JSON-lines detections; blank lines are ignored."""
    dims = VolumeDims.of(dims) if dims is not None else None
    dets = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as e:
            raise DetectionParseError(lineno, "<json>", e.msg) from None
        dets.append(_parse_record(doc, lineno, dims))
    return DetectionSet(dets)


def loads_detections(text: str, dims=None) -> DetectionSet:
    return load_detections(io.StringIO(text), dims)
