"""File-based pipeline stages: synth -> detect -> cluster -> fuse -> eval.

Every stage reads its inputs from files and writes its outputs to the output
directory under canonical names, so stages can be rerun one at a time.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .cluster import ClusterResult, FusionResult, cluster_axis, fuse_axes
from .config import PipelineConfig
from .detectsim import DetectionSet, dumps_detections, load_detections, nms, simulate_detections
from .metrics import evaluate
from .slicing import gt_boxes
from .synthgen import GroundTruth, place_nuclei
from .voxelcore import Axis, load_volume, save_volume

log = logging.getLogger(__name__)

VOLUME = "volume.raw"
GROUND_TRUTH = "ground_truth.json"
FUSION = "fusion.json"
EVAL = "eval.json"
MANIFEST = "manifest.json"


def detections_name(axis: Axis) -> str:
    return f"detections_{axis.value}.jsonl"


def gt_boxes_name(axis: Axis) -> str:
    return f"gt_boxes_{axis.value}.jsonl"


def cluster_name(axis: Axis) -> str:
    return f"cluster_{axis.value}.json"


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def _read_json(path: Path, stage: str):
    path = Path(path)
    if not path.exists():
        raise StageError(stage, f"missing input file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise StageError(stage, f"{path}: invalid JSON ({e})") from None


def prepare_output(out, stage: str) -> Path:
    """Create ``out`` and make sure it is writable before any compute happens."""
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as e:
        raise StageError(stage, f"output directory {out} is not writable: {e}") from None
    return out


def run_synth(cfg: PipelineConfig, out) -> list[Path]:
    out = prepare_output(out, "synth")
    synth = replace(cfg.synth, seed=cfg.synth_seed())
    try:
        volume, gt = place_nuclei(synth)
    except Exception as e:
        raise StageError("synth", str(e)) from e
    raw, hdr = save_volume(volume, out / VOLUME)
    gt_path = gt.save(out / GROUND_TRUTH)
    log.info("synth: %d nuclei in %s", gt.count, volume.dims.shape)
    return [raw, hdr, gt_path]


def run_detect(cfg: PipelineConfig, out, volume_path=None) -> list[Path]:
    out = prepare_output(out, "detect")
    volume_path = Path(volume_path) if volume_path else out / VOLUME
    try:
        volume = load_volume(volume_path)
    except (FileNotFoundError, ValueError) as e:
        raise StageError("detect", str(e)) from None
    noise = replace(cfg.noise, seed=cfg.noise_seed())
    written = []
    for axis in cfg.axes:
        boxes = gt_boxes(volume, axis)
        (out / gt_boxes_name(axis)).write_text(dumps_detections(DetectionSet.from_gt(boxes)))
        dets = simulate_detections(boxes, noise, volume.dims, axes=[axis])
        if cfg.nms_iou is not None:
            dets = nms(dets, cfg.nms_iou)
        path = out / detections_name(axis)
        path.write_text(dumps_detections(dets))
        written += [out / gt_boxes_name(axis), path]
        log.info("detect: axis %s, %d GT boxes -> %d detections", axis.value, len(boxes), len(dets))
    return written


def _load_detection_files(paths, stage: str) -> DetectionSet:
    dets = []
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise StageError(stage, f"missing input file: {p}")
        try:
            with p.open() as fh:
                dets.extend(load_detections(fh))
        except ValueError as e:
            raise StageError(stage, f"{p}: {e}") from None
    return DetectionSet(dets)


def run_cluster(cfg: PipelineConfig, out, detection_paths=None) -> tuple[list[Path], tuple[int, int]]:
    """Cluster every axis found in the detection files; returns (paths, k range used)."""
    out = prepare_output(out, "cluster")
    explicit = detection_paths is not None
    if not explicit:
        detection_paths = [out / detections_name(a) for a in cfg.axes]
    dets = _load_detection_files(detection_paths, "cluster")
    n_nuclei = None
    if cfg.k_range == "auto" and (out / GROUND_TRUTH).exists():
        n_nuclei = _read_json(out / GROUND_TRUTH, "cluster").get("count")
    k_range = cfg.resolved_k_range(n_nuclei)
    axes = list(dets.axes) if explicit else list(cfg.axes)
    if not axes:
        raise StageError("cluster", "no detections to cluster")

    def work(axis):
        return cluster_axis(dets, axis, cfg.spacing, k_range, cfg.silhouette)

    try:
        with ThreadPoolExecutor(max_workers=len(axes)) as pool:
            results = list(pool.map(work, axes))
    except ValueError as e:
        raise StageError("cluster", str(e)) from None
    paths = []
    for r in results:
        paths.append(_write_json(out / cluster_name(r.axis), r.to_json()))
        log.info("cluster: axis %s -> k=%d (silhouette %.4f)", r.axis.value, r.k, r.silhouette)
    return paths, k_range


def run_fuse(cfg: PipelineConfig, out, cluster_paths=None) -> Path:
    out = prepare_output(out, "fuse")
    if cluster_paths is None:
        cluster_paths = [out / cluster_name(a) for a in cfg.axes]
    try:
        results = [ClusterResult.from_json(_read_json(p, "fuse")) for p in cluster_paths]
        fused = fuse_axes(results, cfg.fuse_margin, cfg.spacing, cfg.silhouette)
    except ValueError as e:
        raise StageError("fuse", str(e)) from None
    log.info("fuse: %d axes -> %d centroids", len(results), fused.count)
    return _write_json(out / FUSION, fused.to_json())


def run_eval(cfg: PipelineConfig, out, fusion_paths=None, gt_paths=None) -> Path:
    out = prepare_output(out, "eval")
    fusion_paths = fusion_paths or [out / FUSION]
    gt_paths = gt_paths or [out / GROUND_TRUTH]
    if len(fusion_paths) != len(gt_paths):
        raise StageError("eval", "need one ground-truth file per fusion file")
    volumes = []
    try:
        for fp, gp in zip(fusion_paths, gt_paths):
            doc = _read_json(fp, "eval")
            # accept either a fusion result or a single-axis cluster result
            est = FusionResult.from_json(doc).centroids if "support" in doc else ClusterResult.from_json(doc).centroids
            gt = GroundTruth.from_json(_read_json(gp, "eval"))
            volumes.append((est, gt.centroid_array()))
        report = evaluate(volumes, cfg.t_dist, cfg.spacing)
    except ValueError as e:
        raise StageError("eval", str(e)) from None
    log.info("eval: MAPE %.3f%%, mAP %.4f", report.mape, report.map_score)
    return _write_json(out / EVAL, report.to_json())


def run_pipeline(cfg: PipelineConfig, out=None) -> dict:
    """All stages in order plus ``manifest.json``; returns the manifest."""
    out = prepare_output(out or cfg.output_dir, "pipeline")
    stages: dict[str, dict] = {}
    timings: dict[str, float] = {}

    def timed(name, fn):
        t0 = time.perf_counter()
        result = fn()
        timings[name] = round(time.perf_counter() - t0, 6)
        return result

    stages["synth"] = {"outputs": timed("synth", lambda: run_synth(cfg, out))}
    stages["detect"] = {"outputs": timed("detect", lambda: run_detect(cfg, out))}
    paths, k_range = timed("cluster", lambda: run_cluster(cfg, out))
    stages["cluster"] = {"outputs": paths, "k_range": list(k_range)}
    stages["fuse"] = {"outputs": [timed("fuse", lambda: run_fuse(cfg, out))]}
    stages["eval"] = {"outputs": [timed("eval", lambda: run_eval(cfg, out))]}
    for entry in stages.values():
        entry["outputs"] = [os.path.relpath(p, out) for p in entry["outputs"]]
    config = cfg.to_dict()
    config.pop("output_dir")
    manifest = {
        "tool": "slicecluster",
        "version": __version__,
        "config": config,
        "stage_seeds": {"synth": cfg.synth_seed(), "detect": cfg.noise_seed()},
        "stages": stages,
        "timings": timings,
    }
    _write_json(out / MANIFEST, manifest)
    return manifest
