"""Report types and their JSON/CSV renderings.

Wall time is recorded on every report but only written when asked for, so
files from identical runs stay byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

from conformal_density.io import write_csv, write_json

SUMMARY_HEADER = (
    "estimator",
    "coverage",
    "coverage_se",
    "volume",
    "volume_se",
    "sym_diff",
    "sym_diff_se",
    "excess",
    "excess_se",
)


@dataclass(frozen=True)
class EstimatorOutcome:
    covered: float
    volume: float
    sym_diff: float | None
    excess: float | None


@dataclass(frozen=True)
class RepetitionResult:
    index: int
    bandwidth: float
    n_fit: int
    alpha_tilde: float
    outcomes: dict[str, EstimatorOutcome]


@dataclass(frozen=True)
class EstimatorSummary:
    name: str
    coverage: float
    coverage_se: float | None
    volume: float
    volume_se: float | None
    sym_diff: float | None
    sym_diff_se: float | None
    excess: float | None
    excess_se: float | None

    def row(self) -> list[Any]:
        return [
            self.name,
            self.coverage,
            self.coverage_se,
            self.volume,
            self.volume_se,
            self.sym_diff,
            self.sym_diff_se,
            self.excess,
            self.excess_se,
        ]

    def to_dict(self) -> dict[str, Any]:
        return dict(zip(SUMMARY_HEADER, self.row(), strict=True))


@dataclass(frozen=True)
class OracleSummary:
    cutoff: float
    cutoff_se: float
    volume: float | None
    mc_samples: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "cutoff": self.cutoff,
            "cutoff_se": self.cutoff_se,
            "volume": self.volume,
            "mc_samples": self.mc_samples,
        }


def _meta(report: Any, timing: bool) -> dict[str, Any]:
    meta: dict[str, Any] = {
        "seed": report.seed,
        "seed_scheme": report.seed_scheme,
        "config": report.config,
    }
    if timing:
        meta["wall_time_seconds"] = report.wall_time
    return meta


@dataclass(frozen=True)
class ExperimentReport:
    name: str
    truth: str
    n: int
    alpha: float
    repetitions: int
    estimators: dict[str, EstimatorSummary]
    oracle: OracleSummary | None
    config: dict[str, Any]
    seed: int
    seed_scheme: str
    per_repetition: tuple[RepetitionResult, ...]
    wall_time: float
    benchmark_volume: float | None = None

    kind = "coverage"

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "name": self.name,
            "truth": self.truth,
            "n": self.n,
            "alpha": self.alpha,
            "repetitions": self.repetitions,
            "estimators": {k: v.to_dict() for k, v in self.estimators.items()},
            "oracle": self.oracle.to_dict() if self.oracle else None,
            "benchmark_volume": self.benchmark_volume,
            **_meta(self, timing),
        }

    def csv_rows(self) -> tuple[tuple[str, ...], list[list[Any]]]:
        return SUMMARY_HEADER, [s.row() for s in self.estimators.values()]

    def log_rows(self) -> tuple[tuple[str, ...], list[list[Any]]]:
        """Per-repetition audit log, one row per (repetition, estimator)."""
        header = (
            "repetition",
            "estimator",
            "bandwidth",
            "n_fit",
            "alpha_tilde",
            "covered",
            "volume",
            "sym_diff",
            "excess",
        )
        rows = [
            [r.index, name, r.bandwidth, r.n_fit, r.alpha_tilde, o.covered, o.volume, o.sym_diff, o.excess]
            for r in self.per_repetition
            for name, o in r.outcomes.items()
        ]
        return header, rows


@dataclass(frozen=True)
class RateRow:
    n: int
    estimators: dict[str, EstimatorSummary]


@dataclass(frozen=True)
class RateReport:
    name: str
    truth: str
    alpha: float
    repetitions: int
    rows: tuple[RateRow, ...]
    ratio_estimator: str
    observed_excess_ratio: float | None
    theoretical_sqrt_ratio: float
    theoretical_exponent: float
    theoretical_exponent_ratio: float
    oracle: OracleSummary | None
    config: dict[str, Any]
    seed: int
    seed_scheme: str
    wall_time: float

    kind = "rate"

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "name": self.name,
            "truth": self.truth,
            "alpha": self.alpha,
            "repetitions": self.repetitions,
            "rows": [
                {"n": r.n, "estimators": {k: v.to_dict() for k, v in r.estimators.items()}}
                for r in self.rows
            ],
            "ratio": {
                "estimator": self.ratio_estimator,
                "observed_excess": self.observed_excess_ratio,
                "theoretical_sqrt": self.theoretical_sqrt_ratio,
                "theoretical_exponent": self.theoretical_exponent,
                "theoretical_exponent_ratio": self.theoretical_exponent_ratio,
            },
            "oracle": self.oracle.to_dict() if self.oracle else None,
            **_meta(self, timing),
        }

    def csv_rows(self) -> tuple[tuple[str, ...], list[list[Any]]]:
        header = ("n", "estimator", "sym_diff", "sym_diff_se", "excess", "excess_se")
        rows = [
            [r.n, s.name, s.sym_diff, s.sym_diff_se, s.excess, s.excess_se]
            for r in self.rows
            for s in r.estimators.values()
        ]
        return header, rows


@dataclass(frozen=True)
class StressCase:
    truth: str
    factor: float
    oracle: bool
    report: ExperimentReport
    passed: bool


@dataclass(frozen=True)
class StressReport:
    name: str
    alpha: float
    repetitions: int
    coverage_floor: float
    checked_estimators: tuple[str, ...]
    cases: tuple[StressCase, ...]
    config: dict[str, Any]
    seed: int
    seed_scheme: str
    wall_time: float

    kind = "stress"

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "name": self.name,
            "alpha": self.alpha,
            "repetitions": self.repetitions,
            "coverage_floor": self.coverage_floor,
            "checked_estimators": list(self.checked_estimators),
            "passed": self.passed,
            "cases": [
                {
                    "truth": c.truth,
                    "bandwidth_factor": c.factor,
                    "oracle": c.oracle,
                    "passed": c.passed,
                    "estimators": {k: v.to_dict() for k, v in c.report.estimators.items()},
                }
                for c in self.cases
            ],
            **_meta(self, timing),
        }

    def csv_rows(self) -> tuple[tuple[str, ...], list[list[Any]]]:
        header = ("truth", "bandwidth_factor", *SUMMARY_HEADER)
        rows = [
            [c.truth, c.factor, *s.row()] for c in self.cases for s in c.report.estimators.values()
        ]
        return header, rows


@dataclass(frozen=True)
class CurveRow:
    n: int
    bandwidth: float
    relative_bandwidth: float
    region: str
    volume: float
    volume_se: float | None


@dataclass(frozen=True)
class BandwidthCurveReport:
    name: str
    truth: str
    alpha: float
    repetitions: int
    center_policy: str
    rows: tuple[CurveRow, ...]
    config: dict[str, Any]
    seed: int
    seed_scheme: str
    wall_time: float

    kind = "bandwidth_curve"

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "name": self.name,
            "truth": self.truth,
            "alpha": self.alpha,
            "repetitions": self.repetitions,
            "center_policy": self.center_policy,
            "rows": [
                {
                    "n": r.n,
                    "bandwidth": r.bandwidth,
                    "relative_bandwidth": r.relative_bandwidth,
                    "region": r.region,
                    "volume": r.volume,
                    "volume_se": r.volume_se,
                }
                for r in self.rows
            ],
            **_meta(self, timing),
        }

    def csv_rows(self) -> tuple[tuple[str, ...], list[list[Any]]]:
        header = ("n", "bandwidth", "relative_bandwidth", "region", "volume", "volume_se")
        rows = [
            [r.n, r.bandwidth, r.relative_bandwidth, r.region, r.volume, r.volume_se]
            for r in self.rows
        ]
        return header, rows


Report = ExperimentReport | RateReport | StressReport | BandwidthCurveReport


def write_report(
    report: Report, out_dir: Path | str, timing: bool = False, log: bool = False
) -> list[Path]:
    """Write ``<name>.json`` and ``<name>.csv`` (and ``<name>.log.csv``) under ``out_dir``."""
    out = Path(out_dir)
    json_path = out / f"{report.name}.json"
    csv_path = out / f"{report.name}.csv"
    write_json(json_path, report.to_dict(timing=timing))
    header, rows = report.csv_rows()
    write_csv(csv_path, header, rows)
    written = [json_path, csv_path]
    if log and isinstance(report, ExperimentReport):
        log_path = out / f"{report.name}.log.csv"
        log_header, log_rows = report.log_rows()
        write_csv(log_path, log_header, log_rows)
        written.append(log_path)
    return written
