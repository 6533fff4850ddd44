"""Command-line planner.

Exit codes: 0 success, 2 input parse error, 3 no grasp found, 4 invalid
configuration.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .cloud import fuse, load_cloud
from .errors import (ConfigError, NoCandidates, NoRecovery, ParseError,
                     TooFewPoints, UnsupportedFormat)
from .pipeline import PipelineConfig, emit_viz, export_document, export_grasps, plan

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NO_GRASP = 3
EXIT_CONFIG = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqgrasp")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plan", help="plan grasps for a point cloud")
    p.add_argument("--input", required=True, help="cloud file (ply/pcd/xyz ascii)")
    p.add_argument("--input2", help="second cloud to fuse")
    p.add_argument("--transform2", nargs=12, type=float, metavar="T",
                   help="row-major 3x4 rigid transform applied to --input2")
    p.add_argument("--format", default="auto", choices=["auto", "ply", "pcd", "xyz"])
    p.add_argument("--config", help="JSON config file (defaults when omitted)")
    p.add_argument("--mode", choices=["isolated", "packed"])
    p.add_argument("--seed", type=int)
    p.add_argument("--output", required=True, help="grasp JSON output path")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--emit-viz", metavar="DIR",
                   help="write per-stage PLY geometry and a manifest")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    try:
        cfg_obj = {}
        if args.config:
            with open(args.config) as f:
                cfg_obj = json.load(f)
        cfg = PipelineConfig.from_json(cfg_obj)
        if args.mode:
            cfg = PipelineConfig.from_json({**cfg.to_json(), "mode": args.mode})
        if args.seed is not None:
            cfg = PipelineConfig.from_json({**cfg.to_json(), "rng_seed": args.seed})
    except (ConfigError, json.JSONDecodeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        cloud, diag = load_cloud(args.input, args.format)
        if diag["dropped_non_finite"]:
            print(f"dropped {diag['dropped_non_finite']} non-finite rows",
                  file=sys.stderr)
        if args.input2:
            cloud2, _ = load_cloud(args.input2, args.format)
            T = np.eye(4)
            if args.transform2:
                T[:3, :] = np.asarray(args.transform2, dtype=float).reshape(3, 4)
            cloud = fuse([cloud, cloud2], [np.eye(4), T])
    except (ParseError, UnsupportedFormat, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    try:
        result = plan(cloud, cfg, threads=args.threads)
    except (NoRecovery, NoCandidates, TooFewPoints) as exc:
        print(f"no grasp found: {exc}", file=sys.stderr)
        return EXIT_NO_GRASP

    export_grasps(export_document(result, cfg), args.output)
    if args.emit_viz:
        emit_viz(args.emit_viz, cloud, result, cfg)
    top = result.grasps[0]
    print(f"{len(result.grasps)} grasps ranked; best h={top.score.h:.4g} "
          f"family={top.closing_line.family}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
