"""Kernel density estimation and the augmented estimator.

Every estimate in this package is built on one primitive, ``kernel_sums``:
the unnormalized sum ``S(u) = sum_i K((u - Y_i) / h)`` accumulated over the
data in their stored order. Fixing that order makes the augmented identity
and the conformal comparisons reproducible bit for bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray

from conformal_density.errors import CoverageWarning, GridCoverageError, InvalidInputError
from conformal_density.kernels import KernelSpec, product_kernel

if TYPE_CHECKING:
    from conformal_density.geometry import Grid


def as_points(u: ArrayLike, d: int) -> NDArray[np.float64]:
    """Coerce a point or stack of points to a finite ``(m, d)`` float array."""
    arr = np.asarray(u, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.shape[0] == d else arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise InvalidInputError(f"Expected points of dimension {d}, got shape {np.shape(u)}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("Points must be finite")
    return arr


def as_point(u: ArrayLike, d: int) -> NDArray[np.float64]:
    """Coerce exactly one point to a finite ``(1, d)`` float array."""
    arr = np.asarray(u, dtype=np.float64).reshape(-1)
    if arr.shape[0] != d:
        raise InvalidInputError(f"Expected one point of dimension {d}, got shape {np.shape(u)}")
    return as_points(arr.reshape(1, d), d)


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered sample of n finite points in R^d."""

    points: NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = np.array(self.points, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise InvalidInputError(f"Dataset must be an (n, d) array, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise InvalidInputError("Dataset must contain at least one point")
        if not np.all(np.isfinite(arr)):
            bad = int(np.argwhere(~np.isfinite(arr))[0][0])
            raise InvalidInputError(f"Dataset point {bad} is not finite")
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def d(self) -> int:
        return int(self.points.shape[1])

    def augmented(self, y: ArrayLike) -> Dataset:
        """aug(Y, y): the sample with ``y`` appended as point n+1."""
        return Dataset(np.vstack([self.points, as_point(y, self.d)]))

    def subset(self, indices: NDArray[np.intp]) -> Dataset:
        return Dataset(self.points[indices])


def kernel_sums(
    points: NDArray[np.float64],
    bandwidth: float,
    kernel: KernelSpec,
    queries: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Unnormalized sums ``S(u) = sum_i K((u - Y_i) / h)`` for each query row.

    Accumulates one data point at a time, in order, vectorized over queries.
    """
    total = np.zeros(queries.shape[0], dtype=np.float64)
    for yi in points:
        total += kernel.evaluate((queries - yi) / bandwidth)
    return total


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    """The kernel density estimator p_n built from ``data`` with bandwidth ``h``."""

    data: Dataset
    bandwidth: float
    kernel: KernelSpec

    def __post_init__(self) -> None:
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise InvalidInputError(f"Bandwidth must be a finite value > 0, got {self.bandwidth}")
        if self.kernel.dimension != self.data.d:
            raise InvalidInputError(
                f"Kernel dimension {self.kernel.dimension} does not match data dimension "
                f"{self.data.d}"
            )

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def d(self) -> int:
        return self.data.d

    @property
    def h_pow_d(self) -> float:
        return float(self.bandwidth**self.d)

    def sums(self, queries: ArrayLike) -> NDArray[np.float64]:
        return kernel_sums(self.data.points, self.bandwidth, self.kernel, as_points(queries, self.d))

    def evaluate(self, queries: ArrayLike) -> NDArray[np.float64]:
        """p_n at each query row."""
        return self.sums(queries) / (self.n * self.h_pow_d)

    def augmented_evaluate(self, y: ArrayLike, queries: ArrayLike) -> NDArray[np.float64]:
        """The augmented estimator p_n^y at each query row."""
        q = as_points(queries, self.d)
        yp = as_point(y, self.d)
        n = self.n
        base = self.evaluate(q)
        self_term = self.kernel.evaluate((q - yp[0]) / self.bandwidth)
        return (n / (n + 1)) * base + self_term / ((n + 1) * self.h_pow_d)


def make_estimate(
    data: Dataset | ArrayLike, bandwidth: float, kernel: KernelSpec | str | None = None
) -> DensityEstimate:
    """Convenience constructor: wraps raw arrays and resolves kernel names."""
    ds = data if isinstance(data, Dataset) else Dataset(np.asarray(data, dtype=np.float64))
    if kernel is None or isinstance(kernel, str):
        spec = product_kernel(kernel or "epanechnikov", ds.d)
    else:
        spec = kernel
    return DensityEstimate(ds, float(bandwidth), spec)


def kde_eval(est: DensityEstimate, u: ArrayLike) -> float:
    """p_n(u) = (1 / (n h^d)) sum_i K((u - Y_i) / h) at a single point."""
    return float(est.evaluate(as_point(u, est.d))[0])


def augmented_eval(est: DensityEstimate, y: ArrayLike, u: ArrayLike) -> float:
    """p_n^y(u) = (n / (n+1)) p_n(u) + K((u - y) / h) / ((n+1) h^d)."""
    return float(est.augmented_evaluate(y, as_point(u, est.d))[0])


def support_bounds(est: DensityEstimate) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Bounding box of the estimator's support: data range expanded by h."""
    pts = est.data.points
    return pts.min(axis=0) - est.bandwidth, pts.max(axis=0) + est.bandwidth


def kde_normalization_check(est: DensityEstimate, grid: Grid, strict: bool = True) -> float:
    """Midpoint-rule integral of p_n over ``grid``.

    The grid must cover the data range expanded by h. When it does not,
    ``strict`` raises ``GridCoverageError``; otherwise the (truncated) integral
    is returned and a ``CoverageWarning`` is emitted.
    """
    if grid.dimension != est.d:
        raise InvalidInputError(f"Grid dimension {grid.dimension} does not match data {est.d}")
    lo, hi = support_bounds(est)
    covers = bool(np.all(grid.lower_array <= lo) and np.all(grid.upper_array >= hi))
    if not covers:
        msg = (
            f"Grid [{grid.lower}, {grid.upper}] does not cover the estimator support "
            f"[{lo.tolist()}, {hi.tolist()}]"
        )
        if strict:
            raise GridCoverageError(msg)
        warnings.warn(msg, CoverageWarning, stacklevel=2)

    total = 0.0
    for chunk in grid.iter_center_chunks():
        total += float(np.sum(est.evaluate(chunk)))
    return total * grid.cell_volume
