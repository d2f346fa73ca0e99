"""Experiment reports: uniform stat rows, verdicts, CSV + text emission.

Floats are printed with 17 significant digits and nothing time- or
host-dependent enters the files, so equal config + seed reproduces every
output byte for byte regardless of worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from ..estimators import EnsembleStat

__all__ = ["StatRow", "Verdict", "ExperimentReport", "emit_report", "fmt_float"]


def fmt_float(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return "%.17g" % x


@dataclass(frozen=True)
class StatRow:
    """One estimator output: stat_name, value, std_error, n_samples."""

    name: str
    value: float
    std_error: float = float("nan")
    n_samples: int = 1

    @staticmethod
    def from_stat(name: str, stat: EnsembleStat) -> "StatRow":
        return StatRow(name, stat.mean, stat.std_error, stat.n_samples)


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    detail: str  # states the tolerance that was applied


@dataclass
class ExperimentReport:
    kind: str
    stats: list[StatRow] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def add_stat(self, name: str, value, std_error: float = float("nan"), n_samples: int = 1):
        if isinstance(value, EnsembleStat):
            self.stats.append(StatRow.from_stat(name, value))
        else:
            self.stats.append(StatRow(name, float(value), std_error, n_samples))

    def add_verdict(self, name: str, passed: bool, detail: str):
        self.verdicts.append(Verdict(name, bool(passed), detail))

    def stat(self, name: str) -> StatRow:
        for row in self.stats:
            if row.name == name:
                return row
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def _stats_csv(report: ExperimentReport) -> str:
    lines = ["stat_name,value,std_error,n_samples"]
    for row in report.stats:
        lines.append(
            f"{row.name},{fmt_float(row.value)},{fmt_float(row.std_error)},{row.n_samples}"
        )
    return "\n".join(lines) + "\n"


def _summary_text(report: ExperimentReport) -> str:
    lines = [f"experiment: {report.kind}"]
    for note in report.notes:
        lines.append(f"note: {note}")
    for v in report.verdicts:
        lines.append(f"{'PASS' if v.passed else 'FAIL'}  {v.name}: {v.detail}")
    lines.append(f"verdict: {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def emit_report(report: ExperimentReport, out_dir) -> dict[str, Path]:
    """Write stats.csv and summary.txt into out_dir; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "stats": out / "stats.csv",
        "summary": out / "summary.txt",
    }
    paths["stats"].write_text(_stats_csv(report), encoding="ascii", newline="\n")
    paths["summary"].write_text(_summary_text(report), encoding="ascii", newline="\n")
    return paths
