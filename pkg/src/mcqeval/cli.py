"""Stage-oriented command-line entry point.

Exit codes: 0 success, 1 config/validation error, 2 missing prerequisite
artifacts, 3 item-level failure threshold breached.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from .config import load_run_config
from .errors import (
    ConfigError,
    FailureThresholdExceeded,
    PipelineError,
    PrerequisiteError,
)
from .pipeline import STAGE_ORDER, run_stage

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PREREQUISITE = 2
EXIT_THRESHOLD = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcqeval",
        description=(
            "Ground baseline MCQs in a textbook corpus, generate constraint-"
            "matched items, judge all sets against the 24-criterion rubric, "
            "and test statistical equivalence."
        ),
    )
    subparsers = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGE_ORDER + ("all",):
        sub = subparsers.add_parser(stage, help=f"run the {stage} stage")
        sub.add_argument("--config", "-c", required=True, help="run config YAML")
        sub.add_argument(
            "--force", action="store_true", help="re-run even when inputs are unchanged"
        )
        sub.add_argument("--verbose", "-v", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_run_config(args.config)
        run_stage(args.stage, cfg, force=args.force)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PrerequisiteError as exc:
        print(f"prerequisite error: {exc}", file=sys.stderr)
        return EXIT_PREREQUISITE
    except FailureThresholdExceeded as exc:
        print(f"failure threshold breached: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
