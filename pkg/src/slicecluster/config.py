"""Pipeline configuration (a single JSON document) and the synthetic-data presets."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .cluster.silhouette import VARIANTS
from .detectsim import NoiseModel
from .synthgen import SynthConfig
from .voxelcore import AXES, Axis, VolumeDims, derive_seed, parse_axes


@dataclass(frozen=True)
class PipelineConfig:
    synth: SynthConfig
    noise: NoiseModel = field(default_factory=NoiseModel)
    axes: tuple[Axis, ...] = AXES
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    k_range: "str | tuple[int, int]" = "auto"
    fuse_margin: int = 5
    t_dist: tuple[float, ...] = tuple(float(t) for t in range(6, 13))
    silhouette: str = "nearest"
    nms_iou: float | None = None
    seed: int | None = None
    output_dir: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "axes", parse_axes(self.axes))
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be three positive numbers, got {self.spacing}")
        object.__setattr__(self, "spacing", spacing)
        if self.k_range != "auto":
            k_min, k_max = (int(k) for k in self.k_range)
            if not 2 <= k_min <= k_max:
                raise ValueError(f"k_range must satisfy 2 <= k_min <= k_max, got {self.k_range}")
            object.__setattr__(self, "k_range", (k_min, k_max))
        t = tuple(float(x) for x in self.t_dist)
        if not t or any(x <= 0 for x in t):
            raise ValueError("t_dist must be a nonempty list of positive thresholds")
        object.__setattr__(self, "t_dist", t)
        if self.silhouette not in VARIANTS:
            raise ValueError(f"silhouette must be one of {VARIANTS}")
        if self.fuse_margin < 0:
            raise ValueError("fuse_margin must be >= 0")
        if self.nms_iou is not None and not 0 <= self.nms_iou <= 1:
            raise ValueError("nms_iou must be in [0, 1]")
        if self.seed is not None and not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    # -- seeds ---------------------------------------------------------------
    def synth_seed(self) -> int:
        return self.synth.seed if self.seed is None else derive_seed(self.seed, "synth")

    def noise_seed(self) -> int:
        return self.noise.seed if self.seed is None else derive_seed(self.seed, "detect")

    def resolved_k_range(self, n_nuclei: int | None = None) -> tuple[int, int]:
        """``auto`` means [2, 2 * number of nuclei]."""
        if self.k_range != "auto":
            return self.k_range
        n = self.synth.n_nuclei if n_nuclei is None else n_nuclei
        return (2, max(2, 2 * n))

    def with_overrides(self, **changes) -> "PipelineConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    # -- serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        s, nm = self.synth, self.noise
        return {
            "seed": self.seed,
            "synth": {
                "dims": list(s.dims.shape),
                "n_nuclei": s.n_nuclei,
                "semi_axis_range": list(s.semi_axis_range),
                "t_ov": s.t_ov,
                "max_attempts_per_nucleus": s.max_attempts_per_nucleus,
                "margin": s.margin,
                "seed": s.seed,
            },
            "noise": {
                "sigma_center": nm.sigma_center,
                "sigma_size": nm.sigma_size,
                "p_miss": nm.p_miss,
                "fp_rate": nm.fp_rate,
                "fp_size_range": list(nm.fp_size_range),
                "seed": nm.seed,
            },
            "axes": [a.value for a in self.axes],
            "spacing": list(self.spacing),
            "k_range": self.k_range if self.k_range == "auto" else list(self.k_range),
            "fuse_margin": self.fuse_margin,
            "t_dist": list(self.t_dist),
            "silhouette": self.silhouette,
            "nms_iou": self.nms_iou,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "synth" not in doc:
            raise ValueError("config needs a 'synth' section")
        synth = dict(doc.pop("synth"))
        synth["dims"] = VolumeDims(*synth["dims"])
        synth["semi_axis_range"] = tuple(synth["semi_axis_range"])
        noise = dict(doc.pop("noise", {}))
        if "fp_size_range" in noise:
            noise["fp_size_range"] = tuple(noise["fp_size_range"])
        return cls(synth=SynthConfig(**synth), noise=NoiseModel(**noise), **doc)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"missing config file: {path}")
        return cls.from_dict(json.loads(path.read_text()))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path


def _preset(dims, n, axis_range, t_ov, t_dist, axes=AXES) -> PipelineConfig:
    return PipelineConfig(
        synth=SynthConfig(VolumeDims(*dims), n, axis_range, t_ov),
        axes=axes,
        t_dist=tuple(float(t) for t in t_dist),
    )


# synthetic regimes; thresholds are the per-dataset T_dist sets
PRESETS = {
    "data1": lambda: _preset((128, 128, 128), 400, (4, 8), 5, range(4, 9)),
    "data2": lambda: _preset((128, 128, 128), 40, (10, 14), 10, range(6, 13)),
    "data3": lambda: _preset((128, 128, 128), 50, (6, 10), 10, range(6, 11)),
    "thin": lambda: _preset((128, 128, 19), 25, (6, 10), 10, range(6, 11), axes=(Axis.Z,)),
}


def preset(name: str) -> PipelineConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
