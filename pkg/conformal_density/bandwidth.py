"""Bandwidth grids and the two volume-driven tuners.

``tune_bonferroni`` builds every candidate on the full sample at level
alpha / m and keeps the smallest region. ``tune_split`` picks the bandwidth
on one half of the sample and builds the final region on the other half.
Both accept an injected ``region_builder`` and ``volume_evaluator`` so they
work with grid or Monte-Carlo volumes in any dimension.

Ties in volume go to the smaller bandwidth.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray

from conformal_density.conformal import ConformalModel, RegionKind
from conformal_density.density import Dataset, make_estimate
from conformal_density.errors import InvalidInputError
from conformal_density.geometry import Grid, mc_volume, rasterize

DEFAULT_BETA = 1.0
DEFAULT_SCALE = 1.0
DEFAULT_SPAN = 8.0
DEFAULT_SPLIT_SIZE = 20
DEFAULT_BONFERRONI_SIZE = 10


class Region(Protocol):
    def contains(self, points: ArrayLike) -> NDArray[np.bool_]: ...


RegionBuilder = Callable[[Dataset, float, float], Region]
VolumeEvaluator = Callable[[Region], float]


@dataclass(frozen=True)
class BandwidthGrid:
    candidates: tuple[float, ...]
    center: float
    span: float

    def __post_init__(self) -> None:
        c = tuple(float(h) for h in self.candidates)
        if not c:
            raise InvalidInputError("A bandwidth grid needs at least one candidate")
        if any(not (math.isfinite(h) and h > 0) for h in c):
            raise InvalidInputError(f"Bandwidth candidates must be finite and > 0: {c}")
        if any(b <= a for a, b in zip(c, c[1:], strict=False)):
            raise InvalidInputError(f"Bandwidth candidates must be strictly increasing: {c}")
        object.__setattr__(self, "candidates", c)

    @property
    def m(self) -> int:
        return len(self.candidates)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> BandwidthGrid:
        ordered = sorted({float(v) for v in values})
        mid = ordered[len(ordered) // 2] if ordered else float("nan")
        span = ordered[-1] / ordered[0] if ordered else 1.0
        return cls(tuple(ordered), mid, span)


def a2_bandwidth(n: int, d: int, beta: float = DEFAULT_BETA, scale: float = DEFAULT_SCALE) -> float:
    """h0 = scale * (log n / n)^(1 / (2 beta + d))."""
    if n < 2:
        raise InvalidInputError(f"n must be >= 2, got {n}")
    if d < 1 or beta <= 0 or scale <= 0:
        raise InvalidInputError(f"Need d >= 1, beta > 0, scale > 0; got {d}, {beta}, {scale}")
    return scale * (math.log(n) / n) ** (1.0 / (2.0 * beta + d))


def reference_bandwidth(n: int) -> float:
    """h_n = sqrt(log n / n), the scale used on bandwidth-curve axes."""
    if n < 2:
        raise InvalidInputError(f"n must be >= 2, got {n}")
    return math.sqrt(math.log(n) / n)


def default_grid(
    n: int,
    d: int,
    beta: float = DEFAULT_BETA,
    m: int = DEFAULT_SPLIT_SIZE,
    scale: float = DEFAULT_SCALE,
    span: float = DEFAULT_SPAN,
) -> BandwidthGrid:
    """m geometric candidates on [h0 / span, h0 * span] around the A2 rate."""
    if m < 1:
        raise InvalidInputError(f"Grid size m must be >= 1, got {m}")
    if span < 1.0 or (m > 1 and span == 1.0):
        raise InvalidInputError(f"Grid span must be > 1, got {span}")
    h0 = a2_bandwidth(n, d, beta, scale)
    if m == 1:
        return BandwidthGrid((h0,), h0, span)
    candidates = np.geomspace(h0 / span, h0 * span, m)
    return BandwidthGrid(tuple(candidates.tolist()), h0, span)


# ============================================================================
# Builders and evaluators
# ============================================================================


def conformal_builder(
    kernel: str = "epanechnikov", kind: RegionKind | str = RegionKind.CONFORMAL
) -> RegionBuilder:
    """A region builder producing one region kind of a fresh ``ConformalModel``."""
    region_kind = RegionKind(kind)

    def build(data: Dataset, h: float, alpha: float) -> Region:
        return ConformalModel(make_estimate(data, h, kernel), alpha).region(region_kind)

    return build


def grid_volume(grid: Grid) -> VolumeEvaluator:
    def evaluate(region: Region) -> float:
        return rasterize(region.contains, grid).volume

    return evaluate


def mc_volume_evaluator(
    lower: ArrayLike, upper: ArrayLike, samples: int, seed: int
) -> VolumeEvaluator:
    """Monte-Carlo volumes; every candidate sees the same uniform draws."""

    def evaluate(region: Region) -> float:
        estimate, _ = mc_volume(region.contains, lower, upper, samples, seed)
        return estimate

    return evaluate


# ============================================================================
# Tuners
# ============================================================================


@dataclass(frozen=True)
class CurvePoint:
    bandwidth: float
    volume: float


@dataclass(frozen=True, eq=False)
class TuningResult:
    """Chosen bandwidth, the final region and everything needed to audit it."""

    bandwidth: float
    region: Region
    volume: float | None
    level: float
    data: Dataset
    curve: tuple[CurvePoint, ...]


def _argmin(curve: Sequence[CurvePoint]) -> CurvePoint:
    best = curve[0]
    for point in curve[1:]:
        if point.volume < best.volume:
            best = point
    return best


def volume_vs_bandwidth(
    data: Dataset,
    grid: BandwidthGrid,
    alpha: float,
    region_builder: RegionBuilder,
    volume_evaluator: VolumeEvaluator,
) -> list[CurvePoint]:
    """Volume of the region built at each candidate bandwidth."""
    return [
        CurvePoint(h, volume_evaluator(region_builder(data, h, alpha))) for h in grid.candidates
    ]


def tune_bonferroni(
    data: Dataset,
    grid: BandwidthGrid,
    alpha: float,
    region_builder: RegionBuilder,
    volume_evaluator: VolumeEvaluator,
) -> TuningResult:
    """Smallest of the m candidate regions, each built at level alpha / m."""
    if not (0.0 < alpha < 1.0):
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    level = alpha / grid.m
    regions: dict[float, Region] = {}
    curve: list[CurvePoint] = []
    for h in grid.candidates:
        regions[h] = region_builder(data, h, level)
        curve.append(CurvePoint(h, volume_evaluator(regions[h])))
    best = _argmin(curve)
    return TuningResult(best.bandwidth, regions[best.bandwidth], best.volume, level, data, tuple(curve))


def split_sample(data: Dataset, seed: int | np.random.SeedSequence) -> tuple[Dataset, Dataset]:
    """Random split; the first part gets ceil(n / 2) points. Each part keeps data order."""
    if data.n < 4:
        raise InvalidInputError(f"Sample splitting needs n >= 4, got {data.n}")
    perm = np.random.default_rng(seed).permutation(data.n)
    first = math.ceil(data.n / 2)
    return data.subset(np.sort(perm[:first])), data.subset(np.sort(perm[first:]))


def tune_split(
    data: Dataset,
    grid: BandwidthGrid,
    alpha: float,
    region_builder: RegionBuilder,
    volume_evaluator: VolumeEvaluator,
    seed: int | np.random.SeedSequence,
) -> TuningResult:
    """Choose h on the first half by volume, then build the final region on the second."""
    if not (0.0 < alpha < 1.0):
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    selection, calibration = split_sample(data, seed)
    curve = volume_vs_bandwidth(selection, grid, alpha, region_builder, volume_evaluator)
    chosen = _argmin(curve).bandwidth
    final = region_builder(calibration, chosen, alpha)
    return TuningResult(chosen, final, None, alpha, calibration, tuple(curve))
