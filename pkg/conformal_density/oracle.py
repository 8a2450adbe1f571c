"""Gaussian-mixture ground truths and their oracle level sets.

The oracle cutoff ``t`` solves ``P(p(Y) <= t) = alpha``. It is estimated as
an order statistic of ``p`` evaluated at Monte-Carlo draws from the mixture,
or, for the frozen benchmark, by quadrature on a fine grid.
Draws are produced in fixed-size chunks, and each chunk has its own child
``SeedSequence``. The result therefore depends only on
``(seed, mc_samples)`` and not on how many workers evaluate the chunks.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from conformal_density.errors import GridTooSmallError, InvalidInputError, PlateauError
from conformal_density.geometry import Grid, GridRegion, rasterize, symmetric_difference_volume
from conformal_density.geometry import excess_loss as _excess_loss

DEFAULT_MC_SAMPLES = 1_000_000
MIN_MC_SAMPLES = 10_000
SAMPLE_CHUNK = 1 << 16
WEIGHT_TOLERANCE = 1e-12
PLATEAU_RTOL = 1e-12
PLATEAU_FRACTION = 1e-3
# One-sigma normal tail, used for the order-statistic standard error.
_ONE_SIGMA_TAIL = float(stats.norm.cdf(-1.0))


@dataclass(frozen=True, eq=False)
class MixtureDensity:
    weights: NDArray[np.float64]
    means: NDArray[np.float64]
    covariances: NDArray[np.float64]

    def __post_init__(self) -> None:
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        mu = np.asarray(self.means, dtype=np.float64)
        if mu.ndim == 1:
            mu = mu.reshape(-1, 1)
        cov = np.asarray(self.covariances, dtype=np.float64)
        if cov.ndim == 1:
            cov = cov.reshape(-1, 1, 1)
        k, d = mu.shape
        if w.shape != (k,) or cov.shape != (k, d, d):
            raise InvalidInputError(
                f"Mixture shapes disagree: weights {w.shape}, means {mu.shape}, "
                f"covariances {cov.shape}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(cov))):
            raise InvalidInputError("Mixture parameters must be finite")
        if np.any(w <= 0):
            raise InvalidInputError("Mixture weights must be > 0")
        if abs(math.fsum(w.tolist()) - 1.0) > WEIGHT_TOLERANCE:
            raise InvalidInputError(f"Mixture weights sum to {math.fsum(w.tolist())!r}, not 1")
        chol = np.empty_like(cov)
        for i, c in enumerate(cov):
            if not np.allclose(c, c.T, rtol=0.0, atol=1e-14 * max(1.0, float(np.abs(c).max()))):
                raise InvalidInputError(f"Covariance {i} is not symmetric")
            try:
                chol[i] = np.linalg.cholesky(c)
            except np.linalg.LinAlgError as e:
                raise InvalidInputError(f"Covariance {i} is not positive definite") from e
        for arr in (w, mu, cov, chol):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(
            self,
            "_components",
            tuple(stats.multivariate_normal(mean=m, cov=c) for m, c in zip(mu, cov, strict=True)),
        )

    @classmethod
    def from_config(cls, block: dict[str, Any]) -> MixtureDensity:
        return cls(
            np.asarray(block["weights"], dtype=np.float64),
            np.asarray(block["means"], dtype=np.float64),
            np.asarray(block["covariances"], dtype=np.float64),
        )

    def to_config(self) -> dict[str, Any]:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @property
    def d(self) -> int:
        return int(self.means.shape[1])

    @property
    def k(self) -> int:
        return int(self.means.shape[0])

    def pdf(self, points: ArrayLike) -> NDArray[np.float64]:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1) if pts.shape[0] == self.d else pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[1] != self.d:
            raise InvalidInputError(f"Expected points of dimension {self.d}, got shape {pts.shape}")
        total = np.zeros(pts.shape[0], dtype=np.float64)
        for w, comp in zip(self.weights, self._components, strict=True):  # type: ignore[attr-defined]
            total += w * np.asarray(comp.pdf(pts), dtype=np.float64).reshape(-1)
        return total

    def sample(self, size: int, rng: np.random.Generator) -> NDArray[np.float64]:
        """Draw ``size`` points: component labels first, then Gaussian noise."""
        labels = rng.choice(self.k, size=size, p=self.weights)
        z = rng.standard_normal((size, self.d))
        chol: NDArray[np.float64] = self._chol  # type: ignore[attr-defined]
        return self.means[labels] + np.einsum("nij,nj->ni", chol[labels], z)


def mixture_pdf(m: MixtureDensity, y: ArrayLike) -> float:
    return float(m.pdf(np.asarray(y, dtype=np.float64).reshape(1, -1))[0])


def standard_normal(d: int = 1) -> MixtureDensity:
    return MixtureDensity(np.ones(1), np.zeros((1, d)), np.eye(d)[np.newaxis])


# ============================================================================
# Cutoff
# ============================================================================


@dataclass(frozen=True)
class OracleCutoff:
    value: float
    standard_error: float
    alpha: float
    mc_samples: int
    seed: int


def _chunk_sizes(total: int, chunk: int) -> list[int]:
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def sample_density_values(
    m: MixtureDensity, mc_samples: int, seed: int, threads: int = 1
) -> NDArray[np.float64]:
    """p(Y) at ``mc_samples`` draws Y ~ m, independent of ``threads``."""
    sizes = _chunk_sizes(mc_samples, SAMPLE_CHUNK)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def draw(job: tuple[int, np.random.SeedSequence]) -> NDArray[np.float64]:
        size, ss = job
        return m.pdf(m.sample(size, np.random.default_rng(ss)))

    jobs = list(zip(sizes, children, strict=True))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(draw, jobs))
    else:
        parts = [draw(job) for job in jobs]
    return np.concatenate(parts)


def check_plateau(values: NDArray[np.float64], cutoff: float) -> None:
    """Raise ``PlateauError`` if too many sampled values tie with the cutoff."""
    ties = int(np.count_nonzero(np.isclose(values, cutoff, rtol=PLATEAU_RTOL, atol=0.0)))
    if ties > PLATEAU_FRACTION * values.shape[0]:
        raise PlateauError(
            f"{ties} of {values.shape[0]} density values tie with the cutoff {cutoff!r}; "
            "the distribution has an atom or plateau at this level"
        )


def quantile_with_error(values: NDArray[np.float64], alpha: float) -> tuple[float, float]:
    """Empirical alpha-quantile (order statistic ceil(alpha N)) and its standard error.

    The error is half the spread between the order statistics at the
    one-sigma beta quantiles of the target rank.
    """
    n = values.shape[0]
    k = min(n, max(1, math.ceil(alpha * n)))
    lo_rank = int(stats.beta.ppf(_ONE_SIGMA_TAIL, k, n - k + 1) * n)
    hi_rank = int(math.ceil(stats.beta.ppf(1.0 - _ONE_SIGMA_TAIL, k, n - k + 1) * n))
    lo_rank = min(max(lo_rank, 1), n)
    hi_rank = min(max(hi_rank, 1), n)
    wanted = sorted({k - 1, lo_rank - 1, hi_rank - 1})
    part = np.partition(values, wanted)
    return float(part[k - 1]), float(part[hi_rank - 1] - part[lo_rank - 1]) / 2.0


def oracle_cutoff(
    m: MixtureDensity,
    alpha: float,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    threads: int = 1,
) -> OracleCutoff:
    """Monte-Carlo t such that the lower level set {p < t} carries mass alpha."""
    if not (0.0 < alpha < 1.0):
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    if mc_samples < MIN_MC_SAMPLES:
        raise InvalidInputError(f"oracle_cutoff needs >= {MIN_MC_SAMPLES} samples, got {mc_samples}")
    values = sample_density_values(m, mc_samples, seed, threads)
    value, se = quantile_with_error(values, alpha)
    check_plateau(values, value)
    return OracleCutoff(value, se, alpha, mc_samples, seed)


def quadrature_cutoff(m: MixtureDensity, alpha: float, grid: Grid) -> OracleCutoff:
    """Deterministic t from cell-center quadrature of p on ``grid``.

    Cells are accumulated in ascending order of p, starting from the mass
    that falls outside the grid; t is the density of the first cell at which
    the accumulated mass reaches alpha. The result carries no sampling error
    (``standard_error == 0`` and ``mc_samples == 0``).
    """
    if not (0.0 < alpha < 1.0):
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    if grid.dimension != m.d:
        raise InvalidInputError(f"Grid dimension {grid.dimension} does not match mixture {m.d}")
    values = np.sort(np.concatenate([m.pdf(chunk) for chunk in grid.iter_center_chunks()]))
    mass = np.cumsum(values * grid.cell_volume)
    outside = 1.0 - float(mass[-1])
    if outside >= alpha:
        raise GridTooSmallError(
            f"Mass {outside!r} outside grid [{grid.lower}, {grid.upper}] exceeds alpha={alpha}"
        )
    k = min(int(np.searchsorted(mass, alpha - outside, side="left")), values.shape[0] - 1)
    return OracleCutoff(float(values[k]), 0.0, alpha, 0, 0)


# ============================================================================
# Regions and losses
# ============================================================================


@dataclass(frozen=True, eq=False)
class OracleRegion:
    density: MixtureDensity
    cutoff: OracleCutoff

    @property
    def alpha(self) -> float:
        return self.cutoff.alpha

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        return self.density.pdf(points) >= self.cutoff.value


def oracle_region(
    m: MixtureDensity,
    alpha: float,
    grid: Grid,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    threads: int = 1,
    cutoff: OracleCutoff | None = None,
) -> tuple[OracleRegion, GridRegion]:
    """The oracle set {p >= t} and its rasterization on ``grid``."""
    if grid.dimension != m.d:
        raise InvalidInputError(f"Grid dimension {grid.dimension} does not match mixture {m.d}")
    cut = cutoff or oracle_cutoff(m, alpha, mc_samples, seed, threads)
    region = OracleRegion(m, cut)
    raster = rasterize(region.contains, grid)
    if raster.touches_boundary:
        raise GridTooSmallError(
            f"Oracle region at alpha={alpha} reaches the boundary of grid "
            f"[{grid.lower}, {grid.upper}]; enlarge the grid"
        )
    return region, raster


def loss_against_oracle(estimate: GridRegion, oracle: GridRegion) -> tuple[float, float]:
    """(symmetric-difference loss, excess loss)."""
    return symmetric_difference_volume(estimate, oracle), _excess_loss(estimate, oracle)


def region_mass(
    contains: Any,
    m: MixtureDensity,
    samples: int,
    seed: int | np.random.SeedSequence | Sequence[int],
) -> tuple[float, float]:
    """P(C) under ``m`` by Monte Carlo, with its binomial standard error."""
    rng = np.random.default_rng(seed)
    hits = 0
    for size in _chunk_sizes(samples, SAMPLE_CHUNK):
        hits += int(np.count_nonzero(contains(m.sample(size, rng))))
    p = hits / samples
    return p, math.sqrt(p * (1.0 - p) / samples)
