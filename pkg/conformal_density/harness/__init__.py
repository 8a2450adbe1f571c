"""Monte-Carlo experiments: coverage tables, rate trends, validity stress, bandwidth curves."""

from conformal_density.errors import ConfigError
from conformal_density.harness.experiments import (
    ExperimentConfig,
    run_bandwidth_curve,
    run_coverage_experiment,
    run_rate_experiment,
)
from conformal_density.harness.report import Report, write_report
from conformal_density.harness.stress import run_validity_stress

__all__ = [
    "ExperimentConfig",
    "Report",
    "run_bandwidth_curve",
    "run_coverage_experiment",
    "run_experiment",
    "run_rate_experiment",
    "run_validity_stress",
    "write_report",
]


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Dispatch on ``cfg.kind``."""
    match cfg.kind:
        case "coverage":
            return run_coverage_experiment(cfg)
        case "rate":
            return run_rate_experiment(cfg)
        case "stress":
            return run_validity_stress(cfg)
        case "bandwidth_curve":
            return run_bandwidth_curve(cfg)
        case _:
            raise ConfigError(f"Unknown experiment kind {cfg.kind!r}")
