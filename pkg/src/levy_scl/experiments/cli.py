"""Command line entry point.

    levy-scl run <config> [--out DIR] [--paths M] [--seed S] [--threads N]
    levy-scl validate <config>
    levy-scl presets

Exit codes: 0 = run passed all verdicts, 2 = a verdict failed,
1 = configuration or runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from ..errors import LevySclError
from ..presets import preset_catalog
from .config import parse_config
from .report import emit_report
from .runner import run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levy-scl")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", type=Path)
    run_p.add_argument("--out", type=Path, default=None, help="output directory")
    run_p.add_argument("--paths", type=int, default=None, help="override ensemble size")
    run_p.add_argument("--seed", type=int, default=None, help="override master seed")
    run_p.add_argument("--threads", type=int, default=1, help="worker threads")

    val_p = sub.add_parser("validate", help="parse and validate a config")
    val_p.add_argument("config", type=Path)

    sub.add_parser("presets", help="list available preset names")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            for section, names in preset_catalog().items():
                print(f"{section}: {', '.join(names)}")
            return 0
        cfg = parse_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: OK ({cfg.kind})")
            return 0
        overrides = {}
        if args.paths is not None:
            overrides["ensemble"] = args.paths
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            cfg = dataclasses.replace(cfg, **overrides)
        report = run_experiment(cfg, threads=max(1, args.threads))
        out_dir = args.out if args.out is not None else Path("levy_scl_out") / args.config.stem
        paths = emit_report(report, out_dir)
        sys.stdout.write(paths["summary"].read_text(encoding="ascii"))
        print(f"report written to {out_dir}")
        return 0 if report.passed else 2
    except LevySclError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
