#!/usr/bin/env python3
"""Run every golden experiment config and print the verdict summaries.

Usage: python scripts/run_all_experiments.py [--out DIR] [--threads N] [--paths M]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import dataclasses

from levy_scl.experiments.config import parse_config
from levy_scl.experiments.report import emit_report
from levy_scl.experiments.runner import run_experiment

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--threads", type=int, default=2)
    ap.add_argument("--paths", type=int, default=None, help="override ensemble size")
    args = ap.parse_args()

    all_pass = True
    for cfg_path in sorted(CONFIG_DIR.glob("*.cfg")):
        cfg = parse_config(cfg_path)
        if args.paths is not None:
            cfg = dataclasses.replace(cfg, ensemble=args.paths)
        t0 = time.perf_counter()
        report = run_experiment(cfg, threads=args.threads)
        elapsed = time.perf_counter() - t0
        out_dir = args.out / cfg_path.stem
        paths = emit_report(report, out_dir)
        print(f"=== {cfg_path.name} ({elapsed:.1f}s) -> {out_dir}")
        print(paths["summary"].read_text(), end="")
        all_pass = all_pass and report.passed
    print(f"\noverall: {'PASS' if all_pass else 'FAIL'}")
    return 0 if all_pass else 2


if __name__ == "__main__":
    raise SystemExit(main())
