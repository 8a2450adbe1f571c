"""Coverage under adversarial truths and deliberately bad bandwidths.

Each truth in the config is crossed with each bandwidth factor (by default
h0 / 20 and 20 h0). A case passes when the conformal and outer-sandwich
coverage both reach ``1 - alpha - 3 sqrt(alpha (1 - alpha) / R)``. Truths
marked ``oracle = false`` skip the oracle losses.
"""

from __future__ import annotations

import math
import time
from dataclasses import replace

from conformal_density.errors import ConfigError
from conformal_density.harness.experiments import (
    SEED_SCHEME,
    ExperimentConfig,
    run_coverage_experiment,
)
from conformal_density.harness.report import StressCase, StressReport

DEFAULT_FACTORS = (1.0 / 20.0, 20.0)
CHECKED_ESTIMATORS = ("conformal", "sandwich_outer")


def nominal_coverage_floor(alpha: float, repetitions: int) -> float:
    return 1.0 - alpha - 3.0 * math.sqrt(alpha * (1.0 - alpha) / repetitions)


def run_validity_stress(cfg: ExperimentConfig) -> StressReport:
    start = time.perf_counter()
    if not cfg.truths:
        raise ConfigError("The validity stress run needs a [[truths]] list")
    factors = cfg.bandwidth.factors or DEFAULT_FACTORS
    floor = nominal_coverage_floor(cfg.alpha, cfg.repetitions)
    checked = tuple(e for e in CHECKED_ESTIMATORS if e in cfg.estimators)

    cases: list[StressCase] = []
    for truth in cfg.truths:
        for factor in factors:
            sub = replace(cfg, bandwidth=replace(cfg.bandwidth, factor=factor))
            report = run_coverage_experiment(sub, truth=truth)
            passed = all(report.estimators[e].coverage >= floor for e in checked)
            cases.append(StressCase(truth.name, factor, truth.oracle, report, passed))

    return StressReport(
        name=cfg.name,
        alpha=cfg.alpha,
        repetitions=cfg.repetitions,
        coverage_floor=floor,
        checked_estimators=checked,
        cases=tuple(cases),
        config=cfg.raw,
        seed=cfg.seed,
        seed_scheme=SEED_SCHEME,
        wall_time=time.perf_counter() - start,
    )
