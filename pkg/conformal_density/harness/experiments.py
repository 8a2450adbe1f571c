"""Monte-Carlo experiment engine.

Every repetition draws its randomness from
``SeedSequence([master_seed, n, repetition])`` split into four named
streams (data, test, split, volume). Repetitions are independent tasks and
results are collected in repetition order, so a report depends only on the
config and the master seed, never on the worker count.
"""

from __future__ import annotations

import math
import multiprocessing
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Any, TypeVar

import numpy as np
from numpy.typing import NDArray

from conformal_density.bandwidth import (
    DEFAULT_BETA,
    DEFAULT_BONFERRONI_SIZE,
    DEFAULT_SCALE,
    DEFAULT_SPAN,
    DEFAULT_SPLIT_SIZE,
    a2_bandwidth,
    conformal_builder,
    default_grid,
    grid_volume,
    mc_volume_evaluator,
    reference_bandwidth,
    tune_bonferroni,
    tune_split,
)
from conformal_density.config import CONFIG_DIR
from conformal_density.conformal import ConformalModel, ModelRegion, RegionKind
from conformal_density.density import Dataset, make_estimate
from conformal_density.errors import ConfigError
from conformal_density.geometry import Grid, GridRegion, default_resolution, mc_volume, rasterize
from conformal_density.harness.report import (
    BandwidthCurveReport,
    CurveRow,
    EstimatorOutcome,
    EstimatorSummary,
    ExperimentReport,
    OracleSummary,
    RateReport,
    RateRow,
    RepetitionResult,
)
from conformal_density.io import load_json
from conformal_density.kernels import DEFAULT_KERNEL
from conformal_density.oracle import (
    DEFAULT_MC_SAMPLES,
    MixtureDensity,
    OracleRegion,
    loss_against_oracle,
    oracle_cutoff,
    oracle_region,
    region_mass,
)

ESTIMATOR_KINDS: dict[str, RegionKind] = {
    "conformal": RegionKind.CONFORMAL,
    "sandwich_inner": RegionKind.INNER,
    "sandwich_outer": RegionKind.OUTER,
}
COVERAGE_MODES = ("fresh_point", "region_mass")
SEED_SCHEME = "SeedSequence([master_seed, n, repetition]).spawn(4) -> data, test, split, volume"
# Bounds derived from a truth span this many standard deviations around each mean.
_AUTO_BOUND_SDS = 6.0

T = TypeVar("T")


# ============================================================================
# Config
# ============================================================================


@dataclass(frozen=True)
class BandwidthSettings:
    policy: str = "a2"
    value: float | None = None
    grid_size: int = DEFAULT_SPLIT_SIZE
    grid_span: float = DEFAULT_SPAN
    beta: float = DEFAULT_BETA
    scale: float = DEFAULT_SCALE
    tune_region: str = "conformal"
    factor: float = 1.0
    factors: tuple[float, ...] = ()


@dataclass(frozen=True)
class VolumeSettings:
    method: str = "grid"
    resolution: int | None = None
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    mc_samples: int = 100_000


@dataclass(frozen=True)
class OracleSettings:
    enabled: bool = True
    mc_samples: int = DEFAULT_MC_SAMPLES


@dataclass(frozen=True, eq=False)
class TruthSpec:
    name: str
    density: MixtureDensity
    oracle: bool = True
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None

    @classmethod
    def from_block(cls, block: dict[str, Any], default_name: str = "truth") -> TruthSpec:
        return cls(
            name=str(block.get("name", default_name)),
            density=MixtureDensity.from_config(block),
            oracle=bool(block.get("oracle", True)),
            lower=tuple(block["lower"]) if "lower" in block else None,
            upper=tuple(block["upper"]) if "upper" in block else None,
        )


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    name: str
    kind: str
    alpha: float
    repetitions: int
    seed: int
    truth: TruthSpec | None = None
    truths: tuple[TruthSpec, ...] = ()
    n: int | None = None
    n_values: tuple[int, ...] = ()
    estimators: tuple[str, ...] = tuple(ESTIMATOR_KINDS)
    coverage_mode: str = "fresh_point"
    region_mass_samples: int = 20_000
    threads: int = 1
    beta: float = 1.0
    gamma: float = 1.0
    kernel: str = DEFAULT_KERNEL
    bandwidth: BandwidthSettings = field(default_factory=BandwidthSettings)
    volume: VolumeSettings = field(default_factory=VolumeSettings)
    oracle: OracleSettings = field(default_factory=OracleSettings)
    raw: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        """Build from a schema-validated config dict."""
        exp = data["experiment"]
        bw = data.get("bandwidth", {})
        vol = data.get("volume", {})
        orc = data.get("oracle", {})
        truth = TruthSpec.from_block(data["truth"]) if "truth" in data else None
        truths = tuple(
            TruthSpec.from_block(block, f"truth{i}") for i, block in enumerate(data.get("truths", []))
        )
        kind = exp["kind"]
        n_values = tuple(int(v) for v in exp.get("n_values", ()))
        n = exp.get("n")

        if kind in ("coverage", "rate", "bandwidth_curve") and truth is None:
            raise ConfigError(f"experiment.kind = {kind!r} needs a [truth] table")
        if kind == "stress" and not truths:
            raise ConfigError("experiment.kind = 'stress' needs a [[truths]] list")
        if kind in ("coverage", "stress") and n is None:
            raise ConfigError(f"experiment.n is required for kind {kind!r}")
        if kind == "rate" and len(n_values) < 2:
            raise ConfigError("experiment.n_values needs at least two sizes for kind 'rate'")
        if kind == "bandwidth_curve" and not n_values:
            raise ConfigError("experiment.n_values is required for kind 'bandwidth_curve'")

        policy = bw.get("policy", "a2")
        default_size = DEFAULT_BONFERRONI_SIZE if policy == "bonferroni" else DEFAULT_SPLIT_SIZE
        if policy == "fixed" and "value" not in bw:
            raise ConfigError("bandwidth.value is required for policy 'fixed'")
        if vol.get("method", "grid") == "mc" and ("lower" not in vol or "upper" not in vol):
            raise ConfigError("volume.lower and volume.upper are required for method 'mc'")

        return cls(
            name=exp["name"],
            kind=kind,
            alpha=float(exp["alpha"]),
            repetitions=int(exp["repetitions"]),
            seed=int(exp["seed"]),
            truth=truth,
            truths=truths,
            n=int(n) if n is not None else None,
            n_values=n_values,
            estimators=tuple(exp.get("estimators", ESTIMATOR_KINDS)),
            coverage_mode=exp.get("coverage_mode", "fresh_point"),
            region_mass_samples=int(exp.get("region_mass_samples", 20_000)),
            threads=int(exp.get("threads", 1)),
            beta=float(exp.get("beta", 1.0)),
            gamma=float(exp.get("gamma", 1.0)),
            kernel=data.get("kernel", {}).get("family", DEFAULT_KERNEL),
            bandwidth=BandwidthSettings(
                policy=policy,
                value=float(bw["value"]) if "value" in bw else None,
                grid_size=int(bw.get("grid_size", default_size)),
                grid_span=float(bw.get("grid_span", DEFAULT_SPAN)),
                beta=float(bw.get("beta", DEFAULT_BETA)),
                scale=float(bw.get("scale", DEFAULT_SCALE)),
                tune_region=bw.get("tune_region", "conformal"),
                factors=tuple(float(f) for f in bw.get("factors", ())),
            ),
            volume=VolumeSettings(
                method=vol.get("method", "grid"),
                resolution=int(vol["resolution"]) if "resolution" in vol else None,
                lower=tuple(float(x) for x in vol["lower"]) if "lower" in vol else None,
                upper=tuple(float(x) for x in vol["upper"]) if "upper" in vol else None,
                mc_samples=int(vol.get("mc_samples", 100_000)),
            ),
            oracle=OracleSettings(
                enabled=bool(orc.get("enabled", True)),
                mc_samples=int(orc.get("mc_samples", DEFAULT_MC_SAMPLES)),
            ),
            raw=data,
        )


def truth_bounds(
    truth: TruthSpec, volume: VolumeSettings
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Volume box: explicit settings, then the truth's own bounds, then mean +/- 6 sd."""
    if volume.lower is not None and volume.upper is not None:
        return volume.lower, volume.upper
    if truth.lower is not None and truth.upper is not None:
        return truth.lower, truth.upper
    m = truth.density
    sds = np.sqrt(np.stack([np.diag(c) for c in m.covariances]))
    lo = (m.means - _AUTO_BOUND_SDS * sds).min(axis=0)
    hi = (m.means + _AUTO_BOUND_SDS * sds).max(axis=0)
    return tuple(lo.tolist()), tuple(hi.tolist())


def experiment_grid(truth: TruthSpec, volume: VolumeSettings) -> Grid | None:
    if volume.method != "grid":
        return None
    lower, upper = truth_bounds(truth, volume)
    res = volume.resolution or default_resolution(truth.density.d)
    return Grid.uniform(lower, upper, res)


# ============================================================================
# Parallel map
# ============================================================================


def parallel_map(fn: Callable[[int], T], items: Sequence[int], threads: int) -> list[T]:
    """Ordered map over repetitions, serial for one worker."""
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    ctx = multiprocessing.get_context("spawn")
    with ctx.Pool(processes=min(threads, len(items))) as pool:
        return pool.map(fn, items)


def repetition_streams(seed: int, n: int, rep: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence([seed, n, rep]).spawn(4)


# ============================================================================
# Single repetition
# ============================================================================


@dataclass(frozen=True, eq=False)
class RepetitionTask:
    """Everything a worker needs to run one repetition, picklable."""

    truth: MixtureDensity
    n: int
    alpha: float
    seed: int
    estimators: tuple[str, ...]
    kernel: str
    bandwidth: BandwidthSettings
    volume: VolumeSettings
    bounds: tuple[tuple[float, ...], tuple[float, ...]]
    coverage_mode: str
    region_mass_samples: int
    grid: Grid | None = None
    oracle: OracleRegion | None = None
    oracle_raster: GridRegion | None = None


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


def select_bandwidth(
    task: RepetitionTask, data: Dataset, split_stream: np.random.SeedSequence
) -> ConformalModel:
    """Fit the final model under the task's bandwidth policy."""
    bw = task.bandwidth
    d = data.d
    match bw.policy:
        case "fixed":
            assert bw.value is not None
            return ConformalModel(make_estimate(data, bw.value * bw.factor, task.kernel), task.alpha)
        case "a2":
            h = a2_bandwidth(task.n, d, bw.beta, bw.scale) * bw.factor
            return ConformalModel(make_estimate(data, h, task.kernel), task.alpha)
        case "reference":
            h = reference_bandwidth(task.n) * bw.factor
            return ConformalModel(make_estimate(data, h, task.kernel), task.alpha)
        case "split" | "bonferroni":
            grid = default_grid(task.n, d, bw.beta, bw.grid_size, bw.scale * bw.factor, bw.grid_span)
            builder = conformal_builder(task.kernel, bw.tune_region)
            if task.grid is not None:
                evaluator = grid_volume(task.grid)
            else:
                lower, upper = task.bounds
                evaluator = mc_volume_evaluator(
                    lower, upper, task.volume.mc_samples, _int_seed(split_stream)
                )
            if bw.policy == "split":
                result = tune_split(data, grid, task.alpha, builder, evaluator, split_stream)
            else:
                result = tune_bonferroni(data, grid, task.alpha, builder, evaluator)
            return ConformalModel(
                make_estimate(result.data, result.bandwidth, task.kernel), result.level
            )
        case _:
            raise ConfigError(f"Unknown bandwidth policy {bw.policy!r}")


def run_repetition(task: RepetitionTask, rep: int) -> RepetitionResult:
    data_ss, test_ss, split_ss, volume_ss = repetition_streams(task.seed, task.n, rep)
    data = Dataset(task.truth.sample(task.n, np.random.default_rng(data_ss)))
    model = select_bandwidth(task, data, split_ss)
    test_point = task.truth.sample(1, np.random.default_rng(test_ss))
    volume_seed = _int_seed(volume_ss)
    mass_seed = _int_seed(test_ss)
    lower, upper = task.bounds

    oracle_mc_volume: float | None = None
    if task.grid is None and task.oracle is not None:
        oracle_mc_volume, _ = mc_volume(
            task.oracle.contains, lower, upper, task.volume.mc_samples, volume_seed
        )

    outcomes: dict[str, EstimatorOutcome] = {}
    for name in task.estimators:
        region: ModelRegion = model.region(ESTIMATOR_KINDS[name])
        if task.coverage_mode == "region_mass":
            covered, _ = region_mass(region.contains, task.truth, task.region_mass_samples, mass_seed)
        else:
            covered = float(region.contains(test_point)[0])

        sym_diff: float | None = None
        excess: float | None = None
        if task.grid is not None:
            raster = rasterize(region.contains, task.grid)
            vol = raster.volume
            if task.oracle_raster is not None:
                sym_diff, excess = loss_against_oracle(raster, task.oracle_raster)
        else:
            vol, _ = mc_volume(region.contains, lower, upper, task.volume.mc_samples, volume_seed)
            if task.oracle is not None and oracle_mc_volume is not None:
                oracle = task.oracle

                def xor(points: NDArray[np.float64], r: ModelRegion = region) -> NDArray[np.bool_]:
                    return r.contains(points) ^ oracle.contains(points)

                sym_diff, _ = mc_volume(xor, lower, upper, task.volume.mc_samples, volume_seed)
                excess = vol - oracle_mc_volume
        outcomes[name] = EstimatorOutcome(covered, vol, sym_diff, excess)

    return RepetitionResult(rep, model.est.bandwidth, model.n, model.alpha_tilde, outcomes)


# ============================================================================
# Aggregation
# ============================================================================


def mean_and_se(values: Iterable[float | None]) -> tuple[float | None, float | None]:
    """Mean and sample SD / sqrt(R), summed in the given order. SE is None for R = 1."""
    arr = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if arr.size == 0:
        return None, None
    mean = float(np.mean(arr))
    if arr.size == 1:
        return mean, None
    return mean, float(np.std(arr, ddof=1) / math.sqrt(arr.size))


def summarize(results: Sequence[RepetitionResult], estimators: Sequence[str]) -> dict[str, EstimatorSummary]:
    out: dict[str, EstimatorSummary] = {}
    for name in estimators:
        rows = [r.outcomes[name] for r in results]
        cov, cov_se = mean_and_se(o.covered for o in rows)
        vol, vol_se = mean_and_se(o.volume for o in rows)
        sym, sym_se = mean_and_se(o.sym_diff for o in rows)
        exc, exc_se = mean_and_se(o.excess for o in rows)
        assert cov is not None and vol is not None
        out[name] = EstimatorSummary(name, cov, cov_se, vol, vol_se, sym, sym_se, exc, exc_se)
    return out


# ============================================================================
# Experiments
# ============================================================================


BENCHMARK_FILE = CONFIG_DIR / "benchmark.json"


def frozen_benchmark_volume(truth_name: str, alpha: float) -> float | None:
    """The frozen oracle volume for this truth and level, when one has been recorded."""
    if not BENCHMARK_FILE.is_file():
        return None
    bench = load_json(BENCHMARK_FILE)
    if bench.get("truth") != truth_name or bench.get("alpha") != alpha:
        return None
    return float(bench["volume"])


def _prepare_oracle(
    cfg: ExperimentConfig, truth: TruthSpec, grid: Grid | None
) -> tuple[OracleRegion | None, GridRegion | None]:
    if not (cfg.oracle.enabled and truth.oracle):
        return None, None
    if grid is not None:
        region, raster = oracle_region(
            truth.density, cfg.alpha, grid, cfg.oracle.mc_samples, cfg.seed, cfg.threads
        )
        return region, raster
    cut = oracle_cutoff(truth.density, cfg.alpha, cfg.oracle.mc_samples, cfg.seed, cfg.threads)
    return OracleRegion(truth.density, cut), None


def _oracle_summary(
    region: OracleRegion | None, raster: GridRegion | None
) -> OracleSummary | None:
    if region is None:
        return None
    return OracleSummary(
        cutoff=region.cutoff.value,
        cutoff_se=region.cutoff.standard_error,
        volume=raster.volume if raster is not None else None,
        mc_samples=region.cutoff.mc_samples,
    )


def run_coverage_experiment(
    cfg: ExperimentConfig,
    n: int | None = None,
    truth: TruthSpec | None = None,
    oracle: tuple[OracleRegion | None, GridRegion | None] | None = None,
) -> ExperimentReport:
    """Coverage, volume and oracle losses per estimator, over cfg.repetitions samples."""
    start = time.perf_counter()
    spec = truth or cfg.truth
    size = n or cfg.n
    if spec is None or size is None:
        raise ConfigError("A coverage experiment needs a truth and a sample size")
    if cfg.coverage_mode not in COVERAGE_MODES:
        raise ConfigError(f"Unknown coverage_mode {cfg.coverage_mode!r}")
    grid = experiment_grid(spec, cfg.volume)
    oracle_pair = oracle if oracle is not None else _prepare_oracle(cfg, spec, grid)
    task = RepetitionTask(
        truth=spec.density,
        n=size,
        alpha=cfg.alpha,
        seed=cfg.seed,
        estimators=cfg.estimators,
        kernel=cfg.kernel,
        bandwidth=cfg.bandwidth,
        volume=cfg.volume,
        bounds=truth_bounds(spec, cfg.volume),
        coverage_mode=cfg.coverage_mode,
        region_mass_samples=cfg.region_mass_samples,
        grid=grid,
        oracle=oracle_pair[0],
        oracle_raster=oracle_pair[1],
    )
    results = parallel_map(partial(run_repetition, task), range(cfg.repetitions), cfg.threads)
    return ExperimentReport(
        name=cfg.name,
        truth=spec.name,
        n=size,
        alpha=cfg.alpha,
        repetitions=cfg.repetitions,
        estimators=summarize(results, cfg.estimators),
        oracle=_oracle_summary(*oracle_pair),
        config=cfg.raw,
        seed=cfg.seed,
        seed_scheme=SEED_SCHEME,
        per_repetition=tuple(results),
        wall_time=time.perf_counter() - start,
        benchmark_volume=frozen_benchmark_volume(spec.name, cfg.alpha),
    )


def run_rate_experiment(cfg: ExperimentConfig) -> RateReport:
    """Loss trend over cfg.n_values with one shared oracle."""
    start = time.perf_counter()
    if cfg.truth is None or len(cfg.n_values) < 2:
        raise ConfigError("The rate experiment needs a truth and at least two sample sizes")
    grid = experiment_grid(cfg.truth, cfg.volume)
    shared = _prepare_oracle(cfg, cfg.truth, grid)
    reports = [run_coverage_experiment(cfg, n=n, oracle=shared) for n in cfg.n_values]
    rows = tuple(RateRow(r.n, r.estimators) for r in reports)

    lead = cfg.estimators[0]
    first, last = reports[0].estimators[lead], reports[-1].estimators[lead]
    observed = (
        first.excess / last.excess
        if first.excess is not None and last.excess is not None and last.excess != 0
        else None
    )
    n1, n2 = cfg.n_values[0], cfg.n_values[-1]
    base = (math.log(n1) / n1) / (math.log(n2) / n2)
    d = cfg.truth.density.d
    exponent = cfg.beta * cfg.gamma / (2.0 * cfg.beta + d)
    return RateReport(
        name=cfg.name,
        truth=cfg.truth.name,
        alpha=cfg.alpha,
        repetitions=cfg.repetitions,
        rows=rows,
        ratio_estimator=lead,
        observed_excess_ratio=observed,
        theoretical_sqrt_ratio=math.sqrt(base),
        theoretical_exponent=exponent,
        theoretical_exponent_ratio=base**exponent,
        oracle=_oracle_summary(*shared),
        config=cfg.raw,
        seed=cfg.seed,
        seed_scheme=SEED_SCHEME,
        wall_time=time.perf_counter() - start,
    )


@dataclass(frozen=True, eq=False)
class CurveTask:
    truth: MixtureDensity
    n: int
    alpha: float
    seed: int
    kernel: str
    candidates: tuple[float, ...]
    grid: Grid


def run_curve_repetition(task: CurveTask, rep: int) -> NDArray[np.float64]:
    """Volumes, shape (candidates, 3) for conformal / inner / outer."""
    data_ss = repetition_streams(task.seed, task.n, rep)[0]
    data = Dataset(task.truth.sample(task.n, np.random.default_rng(data_ss)))
    out = np.empty((len(task.candidates), len(RegionKind)), dtype=np.float64)
    for i, h in enumerate(task.candidates):
        model = ConformalModel(make_estimate(data, h, task.kernel), task.alpha)
        for j, kind in enumerate(RegionKind):
            out[i, j] = rasterize(model.region(kind).contains, task.grid).volume
    return out


def run_bandwidth_curve(cfg: ExperimentConfig) -> BandwidthCurveReport:
    """Mean region volume against bandwidth for each sample size."""
    start = time.perf_counter()
    if cfg.truth is None or not cfg.n_values:
        raise ConfigError("The bandwidth curve needs a truth and n_values")
    grid = experiment_grid(cfg.truth, replace(cfg.volume, method="grid"))
    assert grid is not None
    bw = cfg.bandwidth
    rows: list[CurveRow] = []
    for n in cfg.n_values:
        if bw.policy == "reference":
            center = reference_bandwidth(n)
        else:
            center = a2_bandwidth(n, cfg.truth.density.d, bw.beta, bw.scale)
        if bw.grid_size == 1:
            candidates: tuple[float, ...] = (center,)
        else:
            candidates = tuple(
                np.geomspace(center / bw.grid_span, center * bw.grid_span, bw.grid_size).tolist()
            )
        task = CurveTask(cfg.truth.density, n, cfg.alpha, cfg.seed, cfg.kernel, candidates, grid)
        per_rep = parallel_map(
            partial(run_curve_repetition, task), range(cfg.repetitions), cfg.threads
        )
        stacked = np.stack(per_rep)
        for i, h in enumerate(candidates):
            for j, kind in enumerate(RegionKind):
                mean, se = mean_and_se(stacked[:, i, j].tolist())
                assert mean is not None
                rows.append(CurveRow(n, h, h / center, kind.value, mean, se))
    return BandwidthCurveReport(
        name=cfg.name,
        truth=cfg.truth.name,
        alpha=cfg.alpha,
        repetitions=cfg.repetitions,
        center_policy="reference" if bw.policy == "reference" else "a2",
        rows=tuple(rows),
        config=cfg.raw,
        seed=cfg.seed,
        seed_scheme=SEED_SCHEME,
        wall_time=time.perf_counter() - start,
    )
