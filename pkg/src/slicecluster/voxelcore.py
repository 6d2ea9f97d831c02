"""Coordinate conventions, the labeled volume container and small geometric types.

Conventions used everywhere in the package:

* volumes are indexed ``labels[x, y, z]``; on disk voxels are stored x-fastest,
  then y, then z (flat index ``x + y*x_len + z*x_len*y_len``);
* voxel centers sit on integer coordinates;
* a slice along an axis is described by ``(u, v)`` in-slice coordinates plus the
  slice index, see :func:`slice_uv_mapping`.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np


class Axis(str, enum.Enum):
    X = "x"
    Y = "y"
    Z = "z"

    @classmethod
    def parse(cls, value: "str | Axis") -> "Axis":
        if isinstance(value, Axis):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown axis {value!r}; expected one of x, y, z") from None

    @property
    def index(self) -> int:
        return "xyz".index(self.value)


AXES = (Axis.X, Axis.Y, Axis.Z)


def parse_axes(spec: "str | list | tuple") -> tuple[Axis, ...]:
    """Parse ``"x,y,z"`` or a list of axis names into canonical (x, y, z) order."""
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    axes = {Axis.parse(a) for a in items if str(a).strip()}
    if not axes:
        raise ValueError("at least one axis is required")
    return tuple(a for a in AXES if a in axes)


class SliceMapping(NamedTuple):
    """Which 3D coordinate feeds u, v and the slice index (0=x, 1=y, 2=z)."""

    u: int
    v: int
    index: int

    def to_uvp(self, xyz):
        """Map a 3D coordinate triple to (u, v, slice index)."""
        return (xyz[self.u], xyz[self.v], xyz[self.index])

    def to_xyz(self, uvp):
        """Inverse of :meth:`to_uvp`."""
        out = [0, 0, 0]
        out[self.u], out[self.v], out[self.index] = uvp
        return tuple(out)


_MAPPINGS = {
    Axis.Z: SliceMapping(u=0, v=1, index=2),
    Axis.X: SliceMapping(u=1, v=2, index=0),
    Axis.Y: SliceMapping(u=0, v=2, index=1),
}


def slice_uv_mapping(axis: Axis) -> SliceMapping:
    return _MAPPINGS[Axis.parse(axis)]


@dataclass(frozen=True)
class VolumeDims:
    x_len: int
    y_len: int
    z_len: int

    def __post_init__(self):
        for name in ("x_len", "y_len", "z_len"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.x_len, self.y_len, self.z_len)

    @property
    def size(self) -> int:
        return self.x_len * self.y_len * self.z_len

    def along(self, axis: Axis) -> int:
        return self.shape[Axis.parse(axis).index]

    def slice_shape(self, axis: Axis) -> tuple[int, int]:
        m = slice_uv_mapping(axis)
        return (self.shape[m.u], self.shape[m.v])

    @classmethod
    def of(cls, value) -> "VolumeDims":
        if isinstance(value, VolumeDims):
            return value
        return cls(*value)


class Point3(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class BoundingBox2D:
    """Axis-aligned box with inclusive pixel-center coordinates."""

    u_min: float
    v_min: float
    u_max: float
    v_max: float

    def __post_init__(self):
        values = (self.u_min, self.v_min, self.u_max, self.v_max)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"box coordinates must be finite: {values}")
        if self.u_min > self.u_max:
            raise ValueError(f"u_min > u_max in box {values}")
        if self.v_min > self.v_max:
            raise ValueError(f"v_min > v_max in box {values}")

    @property
    def center(self) -> tuple[float, float]:
        return ((self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.u_min, self.v_min, self.u_max, self.v_max)


class LabeledVolume:
    """Dense grid of instance labels, ``0`` = background.

    The array is copied on construction and marked read-only.
    """

    def __init__(self, labels: np.ndarray, check_contiguous: bool = True):
        arr = np.array(labels, copy=True)
        if arr.ndim != 3:
            raise ValueError(f"labels must be 3D, got shape {arr.shape}")
        if arr.size and arr.min() < 0:
            raise ValueError("labels must be non-negative")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"labels must be integers, got {arr.dtype}")
        arr = arr.astype(np.uint16 if (arr.size == 0 or arr.max() <= 0xFFFF) else np.uint32)
        arr.setflags(write=False)
        self.labels = arr
        self.dims = VolumeDims(*arr.shape)
        if check_contiguous:
            present = self.present_labels()
            if present.size and not np.array_equal(present, np.arange(1, present.size + 1)):
                raise ValueError("nonzero labels must be exactly {1..K}")

    @classmethod
    def zeros(cls, dims) -> "LabeledVolume":
        return cls(np.zeros(VolumeDims.of(dims).shape, dtype=np.uint16))

    def present_labels(self) -> np.ndarray:
        u = np.unique(self.labels)
        return u[u > 0]

    @property
    def n_labels(self) -> int:
        return int(self.present_labels().size)

    def __eq__(self, other):
        if not isinstance(other, LabeledVolume):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.labels, other.labels)

    def __repr__(self):
        return f"LabeledVolume(dims={self.dims.shape}, n_labels={self.n_labels})"


def voxel_at(volume: LabeledVolume, x: int, y: int, z: int) -> int:
    d = volume.dims
    if not (0 <= x < d.x_len and 0 <= y < d.y_len and 0 <= z < d.z_len):
        raise IndexError(f"voxel ({x}, {y}, {z}) outside volume of size {d.shape}")
    return int(volume.labels[x, y, z])


# -- raw file format ---------------------------------------------------------

def header_path(raw_path) -> Path:
    return Path(raw_path).with_suffix(".json")


def save_volume(volume: LabeledVolume, raw_path) -> tuple[Path, Path]:
    """Write little-endian u16 labels (x-fastest) plus a JSON sidecar header."""
    raw_path = Path(raw_path)
    if volume.labels.size and int(volume.labels.max()) > 0xFFFF:
        raise ValueError("labels exceed the 16-bit range of the raw format")
    data = volume.labels.astype("<u2").ravel(order="F").tobytes()
    raw_path.write_bytes(data)
    d = volume.dims
    header = {"x_len": d.x_len, "y_len": d.y_len, "z_len": d.z_len, "dtype": "u16", "order": "x-fastest"}
    hdr = header_path(raw_path)
    hdr.write_text(json.dumps(header, indent=2) + "\n")
    return raw_path, hdr


def load_volume(raw_path) -> LabeledVolume:
    raw_path = Path(raw_path)
    hdr = header_path(raw_path)
    for p in (raw_path, hdr):
        if not p.exists():
            raise FileNotFoundError(f"missing volume file: {p}")
    header = json.loads(hdr.read_text())
    if header.get("dtype") != "u16" or header.get("order") != "x-fastest":
        raise ValueError(f"unsupported volume header in {hdr}: {header}")
    dims = VolumeDims(header["x_len"], header["y_len"], header["z_len"])
    flat = np.frombuffer(raw_path.read_bytes(), dtype="<u2")
    if flat.size != dims.size:
        raise ValueError(f"{raw_path}: expected {dims.size} voxels, found {flat.size}")
    return LabeledVolume(flat.reshape(dims.shape, order="F"))


# -- randomness --------------------------------------------------------------

class SeededRng:
    """PCG64 stream keyed by a 64-bit seed; reproducible across platforms."""

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.generator = np.random.Generator(np.random.PCG64(seed))

    def __getattr__(self, name):
        return getattr(self.generator, name)


def derive_seed(seed: int, *tags) -> int:
    """Stable 64-bit seed from a parent seed and string tags (sha256 based)."""
    h = hashlib.sha256(str(int(seed)).encode())
    for tag in tags:
        h.update(b"\x00" + str(tag).encode())
    return int.from_bytes(h.digest()[:8], "little")
