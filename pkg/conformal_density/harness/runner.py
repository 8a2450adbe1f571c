"""Human-readable printing of experiment reports."""

from __future__ import annotations

from conformal_density.harness.report import (
    BandwidthCurveReport,
    ExperimentReport,
    RateReport,
    Report,
    StressReport,
)


def _pm(mean: float | None, se: float | None) -> str:
    if mean is None:
        return "n/a"
    if se is None:
        return f"{mean:.4f}"
    return f"{mean:.4f} ± {se:.4f}"


def _print_estimators(report: ExperimentReport, indent: str = "   ") -> None:
    for s in report.estimators.values():
        print(
            f"{indent}{s.name:<15} coverage {_pm(s.coverage, s.coverage_se)}  "
            f"volume {_pm(s.volume, s.volume_se)}  "
            f"sym-diff {_pm(s.sym_diff, s.sym_diff_se)}  "
            f"excess {_pm(s.excess, s.excess_se)}"
        )


def print_coverage(report: ExperimentReport) -> int:
    print(f"📊 {report.name}: n={report.n}, alpha={report.alpha}, R={report.repetitions}")
    if report.oracle is not None:
        vol = "n/a" if report.oracle.volume is None else f"{report.oracle.volume:.4f}"
        print(f"   oracle cutoff {_pm(report.oracle.cutoff, report.oracle.cutoff_se)}, volume {vol}")
    if report.benchmark_volume is not None:
        print(f"   frozen benchmark volume {report.benchmark_volume:.4f}")
    _print_estimators(report)
    cov = {k: v.coverage for k, v in report.estimators.items()}
    inner, conf = cov.get("sandwich_inner"), cov.get("conformal")
    if inner is not None and conf is not None and inner > conf:
        print("⚠️  WARNING: inner sandwich coverage exceeds conformal coverage")
    print("✅ Done.")
    return 0


def print_rate(report: RateReport) -> int:
    print(f"📊 {report.name}: alpha={report.alpha}, R={report.repetitions}")
    for row in report.rows:
        for s in row.estimators.values():
            print(
                f"   n={row.n:<6} {s.name:<15} sym-diff {_pm(s.sym_diff, s.sym_diff_se)}  "
                f"excess {_pm(s.excess, s.excess_se)}"
            )
    observed = report.observed_excess_ratio
    print(
        f"   excess ratio ({report.ratio_estimator}): observed "
        f"{'n/a' if observed is None else f'{observed:.3f}'}, "
        f"sqrt-rate {report.theoretical_sqrt_ratio:.3f}, "
        f"exponent {report.theoretical_exponent:.3f} -> {report.theoretical_exponent_ratio:.3f}"
    )
    print("✅ Done.")
    return 0


def print_stress(report: StressReport) -> int:
    print(
        f"📊 {report.name}: alpha={report.alpha}, R={report.repetitions}, "
        f"coverage floor {report.coverage_floor:.4f}"
    )
    for case in report.cases:
        mark = "✅" if case.passed else "❌"
        print(f"{mark} {case.truth} x{case.factor:g}")
        _print_estimators(case.report, indent="      ")
    if report.passed:
        print("✅ All stress cases keep nominal coverage.")
        return 0
    print("❌ ERROR: Coverage fell below the floor in at least one case.")
    return 1


def print_curve(report: BandwidthCurveReport) -> int:
    print(f"📊 {report.name}: alpha={report.alpha}, R={report.repetitions}")
    for r in report.rows:
        print(
            f"   n={r.n:<6} h={r.bandwidth:.4f} ({r.relative_bandwidth:.3f} x {report.center_policy}) "
            f"{r.region:<9} volume {_pm(r.volume, r.volume_se)}"
        )
    print("✅ Done.")
    return 0


def print_report(report: Report) -> int:
    """Print a report and return the exit code it implies."""
    if isinstance(report, ExperimentReport):
        return print_coverage(report)
    if isinstance(report, RateReport):
        return print_rate(report)
    if isinstance(report, StressReport):
        return print_stress(report)
    return print_curve(report)
