"""Experiment harness: configs, reports, CSV output and the runner."""

from germlab.lab.config import ConfigError, Section, load_config, parse_text
from germlab.lab.experiments import (
    EXPERIMENTS,
    displacement_experiment,
    dyadic_cover_experiment,
    intersection_experiment,
    monotonicity_experiment,
)
from germlab.lab.report import Claim, Estimate, Report, ci_claim, read_header, write_csv
from germlab.lab.runner import EXIT_ASSERT, EXIT_CONFIG, EXIT_OK, RunResult, run

__all__ = [
    "EXIT_ASSERT",
    "EXIT_CONFIG",
    "EXIT_OK",
    "EXPERIMENTS",
    "Claim",
    "ConfigError",
    "Estimate",
    "Report",
    "RunResult",
    "Section",
    "ci_claim",
    "displacement_experiment",
    "dyadic_cover_experiment",
    "intersection_experiment",
    "load_config",
    "monotonicity_experiment",
    "parse_text",
    "read_header",
    "run",
    "write_csv",
]
