"""Command-line entry point.

Subcommands: align, conflate, georeference, evaluate, serve.
Exit codes: 0 success, 2 config error, 3 data error, 4 coverage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import load_config
from .errors import ConfigError, CoverageError, DataError, MapWeldError


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="TOML pipeline configuration")
    p.add_argument("--control-points", type=Path, dest="control_points",
                   help="control point JSON (source/target pairs, meters)")
    p.add_argument("--labels", type=Path,
                   help="manual TN/FN label JSON keyed by polyline id")
    p.add_argument("--buffer-init", type=float, dest="buffer_init",
                   help="initial buffer half-width in meters")
    p.add_argument("--buffer-growth", type=float, dest="buffer_growth",
                   help="buffer growth factor per retry")
    p.add_argument("--score-threshold", type=float, dest="score_threshold",
                   help="similarity acceptance threshold")
    p.add_argument("--length-threshold", type=float, dest="length_threshold",
                   help="polyline length cutoff for the metrics")
    p.add_argument("--overwrite-attrs", action="store_const", const=True,
                   default=None, dest="overwrite_attrs",
                   help="let transferred attributes overwrite existing ones")
    p.add_argument("--out", type=Path, dest="out_dir",
                   help="output directory for stage artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapweld",
        description="Georeference HD maps against a GNSS trajectory and "
                    "conflate OpenStreetMap attributes into them.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("align", "rigid + rubber-sheet alignment of SLAM/VM/PCM to GNSS"),
            ("conflate", "match OSM ways and transfer semantic attributes"),
            ("georeference", "write the aligned/conflated map in WGS84"),
            ("evaluate", "summarize deviation and matching metrics"),
            ("serve", "start the interactive review service")):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "serve":
            p.add_argument("--host", default="127.0.0.1")
            p.add_argument("--port", type=int, default=8077)
    return parser


_OVERRIDE_KEYS = ("control_points", "labels", "buffer_init", "buffer_growth",
                  "score_threshold", "length_threshold", "overwrite_attrs",
                  "out_dir")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {k: getattr(args, k) for k in _OVERRIDE_KEYS}
        cfg = load_config(args.config, overrides)
        if args.command == "align":
            outcome = pipeline.run_align(cfg)
            print(f"aligned: mean deviation {outcome.report.mean_deviation:.3f} m, "
                  f"std {outcome.report.std_deviation:.3f} m, "
                  f"rmse {outcome.report.rmse:.3f} m")
        elif args.command == "conflate":
            outcome = pipeline.run_conflate(cfg)
            matched = sum(1 for m in outcome.matches if m.matched)
            print(f"conflated: {matched}/{len(outcome.matches)} reference "
                  f"polylines matched, {len(outcome.deleted)} fragments removed")
        elif args.command == "georeference":
            pipeline.run_georeference(cfg)
            print(f"georeferenced map written to {cfg.out_dir}")
        elif args.command == "evaluate":
            bundle = pipeline.run_evaluate(cfg)
            print(json.dumps(bundle, indent=2, sort_keys=True))
        elif args.command == "serve":
            from .service import serve
            serve(cfg, host=args.host, port=args.port)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CoverageError as exc:
        print(f"coverage error: {exc}", file=sys.stderr)
        return 4
    except (DataError, MapWeldError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
