"""Command-line entry point: ``slicecluster {synth,detect,cluster,fuse,eval,pipeline}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import PRESETS, PipelineConfig, preset
from .voxelcore import parse_axes


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="pipeline config JSON")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="start from a synthetic-data preset")
    parser.add_argument("--out", help="output directory (default: config output_dir)")
    parser.add_argument("--seed", type=int, help="global seed, overrides the config")
    parser.add_argument("--axes", help="comma-separated subset of x,y,z")
    parser.add_argument("--quiet", action="store_true", help="only print errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slicecluster", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled volume and its ground truth")
    _common(p)
    p = sub.add_parser("detect", help="simulate per-slice detections from a volume")
    _common(p)
    p.add_argument("--volume", help="raw volume file (default: OUT/volume.raw)")
    p = sub.add_parser("cluster", help="per-axis AHC + silhouette selection")
    _common(p)
    p.add_argument("--detections", nargs="+", help="JSON-lines detection files (default: OUT/detections_<axis>.jsonl)")
    p = sub.add_parser("fuse", help="3-way majority voting over per-axis results")
    _common(p)
    p.add_argument("--clusters", nargs="+", help="cluster result files (default: OUT/cluster_<axis>.json)")
    p = sub.add_parser("eval", help="MAPE / AP / mAP against ground truth")
    _common(p)
    p.add_argument("--fusion", nargs="+", help="fusion (or cluster) result files, one per volume")
    p.add_argument("--gt", nargs="+", help="ground-truth files, one per volume")
    p = sub.add_parser("pipeline", help="run every stage and write a manifest")
    _common(p)
    return parser


def resolve_config(args) -> PipelineConfig:
    if args.config:
        cfg = PipelineConfig.load(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        cfg = preset("data2")
    return cfg.with_overrides(
        seed=args.seed,
        axes=parse_axes(args.axes) if args.axes else None,
        output_dir=args.out,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error [config]: {e}", file=sys.stderr)
        return 2
    out = cfg.output_dir
    try:
        if args.command == "synth":
            pipeline.run_synth(cfg, out)
        elif args.command == "detect":
            pipeline.run_detect(cfg, out, args.volume)
        elif args.command == "cluster":
            _, k_range = pipeline.run_cluster(cfg, out, args.detections)
            logging.getLogger(__name__).info("k range %s", list(k_range))
        elif args.command == "fuse":
            pipeline.run_fuse(cfg, out, args.clusters)
        elif args.command == "eval":
            path = pipeline.run_eval(cfg, out, args.fusion, args.gt)
            if not args.quiet:
                print(path.read_text(), end="")
        else:
            pipeline.run_pipeline(cfg, out)
    except pipeline.StageError as e:
        print(f"error {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
