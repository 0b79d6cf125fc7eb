"""Command-line entry point.

    idrkit run STAGE --config pipeline.toml [--force] [--dry-run]
    idrkit pipeline --config pipeline.toml [--until STAGE]
    idrkit stages

Exit codes: 0 success, 2 config error, 3 missing upstream artifact,
4 stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_config
from .pipeline import STAGES, StageFailure, UpstreamMissing, run_stage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UPSTREAM = 3
EXIT_STAGE = 4

# default order for `idrkit pipeline` (review stages are on demand)
PIPELINE_ORDER = ("ingest", "mine", "segment", "align", "prosody", "assemble",
                  "split", "stats", "train", "eval")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idrkit")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a single pipeline stage")
    run.add_argument("stage", choices=STAGES)
    run.add_argument("--config", required=True)
    run.add_argument("--force", action="store_true",
                     help="re-run even if outputs are up to date")
    run.add_argument("--dry-run", action="store_true",
                     help="print the stage plan without running it")

    pipe = sub.add_parser("pipeline", help="run stages in order")
    pipe.add_argument("--config", required=True)
    pipe.add_argument("--until", choices=PIPELINE_ORDER, default="eval")
    pipe.add_argument("--force", action="store_true")
    pipe.add_argument("--dry-run", action="store_true")

    sub.add_parser("stages", help="list stages in order")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "stages":
        for stage in STAGES:
            print(stage)
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "run":
        stages = [args.stage]
    else:
        stop = PIPELINE_ORDER.index(args.until)
        stages = list(PIPELINE_ORDER[: stop + 1])

    for stage in stages:
        try:
            result = run_stage(stage, cfg, force=args.force, dry_run=args.dry_run)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except UpstreamMissing as exc:
            print(f"upstream missing: {exc}", file=sys.stderr)
            return EXIT_UPSTREAM
        except StageFailure as exc:
            print(f"stage failure: {exc}", file=sys.stderr)
            return EXIT_STAGE
        print(json.dumps(result, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
