"""Synthetic labeled volumes of randomly placed, rotated ellipsoidal nuclei."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .voxelcore import LabeledVolume, Point3, SeededRng, VolumeDims


class PlacementError(RuntimeError):
    def __init__(self, nucleus_index: int, attempts: int):
        self.nucleus_index = nucleus_index
        self.attempts = attempts
        super().__init__(
            f"could not place nucleus {nucleus_index} within {attempts} attempts "
            "(overlap bound too tight for the requested density)"
        )


@dataclass(frozen=True)
class EllipsoidSpec:
    center: Point3
    semi_axes: tuple[float, float, float]
    rotation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    label: int = 1

    def __post_init__(self):
        object.__setattr__(self, "center", Point3(*map(float, self.center)))
        object.__setattr__(self, "semi_axes", tuple(float(a) for a in self.semi_axes))
        object.__setattr__(self, "rotation", tuple(float(t) for t in self.rotation))
        if len(self.semi_axes) != 3 or len(self.rotation) != 3:
            raise ValueError("semi_axes and rotation need three components")
        if not all(math.isfinite(a) and a >= 1 for a in self.semi_axes):
            raise ValueError(f"semi-axes must be finite and >= 1, got {self.semi_axes}")
        if not all(math.isfinite(v) for v in (*self.center, *self.rotation)):
            raise ValueError("center and rotation must be finite")
        if int(self.label) != self.label or self.label < 1:
            raise ValueError(f"label must be a positive integer, got {self.label}")


@dataclass(frozen=True)
class SynthConfig:
    dims: VolumeDims
    n_nuclei: int
    semi_axis_range: tuple[float, float]
    t_ov: int = 0
    max_attempts_per_nucleus: int = 1000
    seed: int = 0
    margin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "dims", VolumeDims.of(self.dims))
        a_min, a_max = (float(a) for a in self.semi_axis_range)
        object.__setattr__(self, "semi_axis_range", (a_min, a_max))
        if not 1 <= a_min <= a_max:
            raise ValueError(f"need 1 <= a_min <= a_max, got {self.semi_axis_range}")
        if self.n_nuclei < 0 or self.t_ov < 0:
            raise ValueError("n_nuclei and t_ov must be non-negative")
        if self.max_attempts_per_nucleus < 1:
            raise ValueError("max_attempts_per_nucleus must be >= 1")
        if self.margin < 0 or any(2 * self.margin > n - 1 for n in self.dims.shape):
            raise ValueError(f"margin {self.margin} leaves no room for centers in {self.dims.shape}")


@dataclass
class GroundTruth:
    specs: list[EllipsoidSpec] = field(default_factory=list)
    centroids: list[Point3] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.specs)

    def centroid_array(self) -> np.ndarray:
        return np.asarray(self.centroids, dtype=float).reshape(-1, 3)

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "nuclei": [
                {
                    "label": s.label,
                    "center": list(s.center),
                    "semi_axes": list(s.semi_axes),
                    "rotation": list(s.rotation),
                    "centroid": list(c),
                }
                for s, c in zip(self.specs, self.centroids)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GroundTruth":
        nuclei = doc.get("nuclei", [])
        if doc.get("count", len(nuclei)) != len(nuclei):
            raise ValueError("ground truth count does not match the number of nuclei")
        specs = [EllipsoidSpec(n["center"], n["semi_axes"], n["rotation"], n["label"]) for n in nuclei]
        return cls(specs, [Point3(*map(float, n["centroid"])) for n in nuclei])

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=1) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "GroundTruth":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"missing ground-truth file: {path}")
        return cls.from_json(json.loads(path.read_text()))


def rotation_matrix(angles) -> np.ndarray:
    """R = Rz(tz) @ Ry(ty) @ Rx(tx): extrinsic rotations about x, then y, then z."""
    tx, ty, tz = angles
    cx, sx = math.cos(tx), math.sin(tx)
    cy, sy = math.cos(ty), math.sin(ty)
    cz, sz = math.cos(tz), math.sin(tz)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def rasterize_ellipsoid(spec: EllipsoidSpec, dims) -> np.ndarray:
    """Integer voxel coordinates ``(m, 3)`` strictly inside the ellipsoid and the volume.

    Rows are sorted x-fastest (same order as the raw file layout).
    """
    dims = VolumeDims.of(dims)
    rot = rotation_matrix(spec.rotation)
    axes = np.asarray(spec.semi_axes)
    center = np.asarray(spec.center)
    # half-extent of the rotated ellipsoid along each world axis
    extent = np.sqrt(((rot * axes) ** 2).sum(axis=1))
    lo = np.maximum(np.floor(center - extent), 0).astype(int)
    hi = np.minimum(np.ceil(center + extent), np.array(dims.shape) - 1).astype(int)
    if np.any(hi < lo):
        return np.empty((0, 3), dtype=np.int64)
    zz, yy, xx = np.meshgrid(
        np.arange(lo[2], hi[2] + 1),
        np.arange(lo[1], hi[1] + 1),
        np.arange(lo[0], hi[0] + 1),
        indexing="ij",
    )
    coords = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1).astype(np.int64)
    # row-vector form of R^T @ (p - c)
    local = (coords - center) @ rot
    inside = ((local / axes) ** 2).sum(axis=1) < 1.0
    return coords[inside]


def flat_indices(coords: np.ndarray, dims) -> np.ndarray:
    dims = VolumeDims.of(dims)
    return coords[:, 0] + coords[:, 1] * dims.x_len + coords[:, 2] * (dims.x_len * dims.y_len)


def _sample_spec(rng: SeededRng, config: SynthConfig, label: int) -> EllipsoidSpec:
    lo = np.full(3, config.margin)
    hi = np.array(config.dims.shape, dtype=float) - 1 - config.margin
    center = rng.uniform(lo, hi)
    a_min, a_max = config.semi_axis_range
    semi = rng.uniform(a_min, a_max, size=3)
    angles = rng.uniform(0.0, math.pi, size=3)
    return EllipsoidSpec(tuple(center), tuple(semi), tuple(angles), label)


def _compatible(flat, lo, hi, other, t_ov) -> bool:
    oflat, olo, ohi = other
    if np.any(hi < olo) or np.any(ohi < lo):
        return True
    shared = np.intersect1d(flat, oflat, assume_unique=True).size
    # never let a tiny (border-clipped) nucleus vanish under the new one
    return shared <= t_ov and shared < oflat.size


def place_nuclei(config: SynthConfig) -> tuple[LabeledVolume, GroundTruth]:
    """Sequential random placement with a pairwise voxel-overlap bound of ``t_ov``.

    Later labels overwrite earlier ones on shared voxels; ground-truth centroids
    come from each nucleus's own (pre-overwrite) voxel set.
    """
    rng = SeededRng(config.seed)
    dims = config.dims
    labels = np.zeros(dims.shape, dtype=np.uint16 if config.n_nuclei <= 0xFFFF else np.uint32)
    placed: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []  # (flat idx, bbox lo, bbox hi)
    gt = GroundTruth()
    for k in range(1, config.n_nuclei + 1):
        for _ in range(config.max_attempts_per_nucleus):
            spec = _sample_spec(rng, config, k)
            coords = rasterize_ellipsoid(spec, dims)
            if coords.shape[0] == 0:
                continue
            flat = np.sort(flat_indices(coords, dims))
            lo, hi = coords.min(axis=0), coords.max(axis=0)
            if all(_compatible(flat, lo, hi, other, config.t_ov) for other in placed):
                break
        else:
            raise PlacementError(k, config.max_attempts_per_nucleus)
        placed.append((flat, lo, hi))
        labels[coords[:, 0], coords[:, 1], coords[:, 2]] = k
        gt.specs.append(spec)
        gt.centroids.append(Point3(*(math.fsum(c) / coords.shape[0] for c in coords.T.tolist())))
    return LabeledVolume(labels), gt


def voxel_centroid(volume: LabeledVolume, label: int) -> Point3:
    """Mean integer coordinate of the voxels carrying ``label``."""
    idx = np.nonzero(volume.labels == label)
    if idx[0].size == 0:
        raise ValueError(f"label {label} is not present in the volume")
    return Point3(*(math.fsum(a.tolist()) / a.size for a in idx))
