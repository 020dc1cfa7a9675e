"""Command-line driver.

    solarsr <stage> --config pipeline.cfg [--lr-dir ...] [--hr-dir ...]
            [--output-dir ...] [--workers N] [--seed N]
    solarsr interp --config pipeline.cfg --alpha 0.8

The config path may also come from the SOLARSR_CONFIG environment variable
(the only environment override). Failures print a one-line JSON error
summary to stderr and exit nonzero: 2 for configuration errors, 1 for
stage failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import load_config
from .errors import ConfigError, SolarSRError, StageError
from .pipeline import STAGES, run_stage


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solarsr",
        description="Align solar LR/HR image pairs, run generator inference, "
                    "and evaluate the outputs.",
    )
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        p.add_argument("--config", default=None,
                       help="config file (or set SOLARSR_CONFIG)")
        p.add_argument("--lr-dir", default=None, help="override lr_dir")
        p.add_argument("--hr-dir", default=None, help="override hr_dir")
        p.add_argument("--output-dir", default=None, help="override output_dir")
        p.add_argument("--workers", type=int, default=None, help="override workers")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        if stage in ("interp", "all"):
            p.add_argument("--alpha", type=float, default=None,
                           help="checkpoint blend weight (overrides config)")
    return parser


def _fail(kind: str, exc: Exception, code: int) -> int:
    summary = {"error": type(exc).__name__, "kind": kind, "message": str(exc)}
    if isinstance(exc, StageError):
        if exc.stage:
            summary["stage"] = exc.stage
        if exc.pair_id:
            summary["pair_id"] = exc.pair_id
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config_path = args.config or os.environ.get("SOLARSR_CONFIG")
    if not config_path:
        return _fail("config", ConfigError(
            "no config file: pass --config or set SOLARSR_CONFIG"), 2)
    try:
        config = load_config(config_path)
        for attr, key in (("lr_dir", "lr_dir"), ("hr_dir", "hr_dir"),
                          ("output_dir", "output_dir"), ("workers", "workers"),
                          ("seed", "seed")):
            value = getattr(args, attr, None)
            if value is not None:
                setattr(config, key, value)
    except ConfigError as exc:
        return _fail("config", exc, 2)
    try:
        run_stage(config, args.stage, alpha=getattr(args, "alpha", None))
    except ConfigError as exc:
        return _fail("config", exc, 2)
    except SolarSRError as exc:
        return _fail("stage", exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
