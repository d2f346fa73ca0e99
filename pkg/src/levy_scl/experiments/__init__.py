"""Declarative experiment orchestration: configs, runners, reports, CLI."""

from .config import ExperimentConfig, parse_config, parse_config_text, validate_config
from .report import ExperimentReport, StatRow, Verdict, emit_report
from .runner import run_experiment

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "parse_config_text",
    "validate_config",
    "ExperimentReport",
    "StatRow",
    "Verdict",
    "emit_report",
    "run_experiment",
]
