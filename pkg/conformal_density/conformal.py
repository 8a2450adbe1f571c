"""Conformal p-values, region membership and the sandwiching level sets.

Membership rule
---------------
The p-value at ``y`` is ``pi(y) = count(y) / (n + 1)`` where ``count(y)``
counts the augmented scores not exceeding the score of ``y``, the
self-comparison included. A point belongs to the conformal region when
``count(y) > i_cut`` (``pi(y) > alpha_tilde``), i.e. at least ``i_cut``
data scores lie at or below the candidate score. With ``i_cut = 0`` every
point is a member.

Arithmetic
----------
All comparisons run on unnormalized kernel sums (``density.kernel_sums``):

    conformal   S(Y_i) + K((Y_i - y)/h) <= S(y) + K(0), counted over i
    inner       S(y) >= S_(i_cut)
    outer       S(y) + psi_K >= S_(i_cut)

Floating-point addition is monotone, so inner <= conformal <= outer holds
exactly in float64, with no tolerance. ``pvalue_counts`` is the O(n) per
query path; ``pvalue_counts_direct`` rebuilds aug(Y, y) and recomputes
every augmented score (O(n^2) per query). Both perform the same additions
in the same order and return identical counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import StrEnum
from fractions import Fraction

import numpy as np
from numpy.typing import ArrayLike, NDArray

from conformal_density.density import (
    Dataset,
    DensityEstimate,
    as_point,
    as_points,
    kernel_sums,
    make_estimate,
)
from conformal_density.errors import InvalidInputError

# Query rows per vectorized pass in the p-value loop.
QUERY_CHUNK = 8192


class RegionKind(StrEnum):
    CONFORMAL = "conformal"
    INNER = "inner"
    OUTER = "outer"


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")


def cut_index(n: int, alpha: float) -> int:
    """i_cut = floor((n + 1) * alpha), exact for alpha read as the decimal it prints as.

    ``0.3`` is taken as 3/10, so ``cut_index(9, 0.3) == 3`` even though the
    nearest double lies just below 0.3.
    """
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    _check_alpha(alpha)
    return math.floor((n + 1) * Fraction(repr(float(alpha))))


def alpha_tilde(n: int, alpha: float) -> float:
    """floor((n + 1) * alpha) / (n + 1)."""
    return cut_index(n, alpha) / (n + 1)


@dataclass(frozen=True)
class SandwichCutoffs:
    """Normalized cutoffs of the inner and outer level sets.

    Both are -inf when the level is degenerate (i_cut = 0).
    """

    t_minus: float
    t_plus: float
    degenerate: bool


@dataclass(frozen=True, eq=False)
class ConformalModel:
    """A density estimate at level alpha, with its scores sorted at build time."""

    est: DensityEstimate
    alpha: float
    i_cut: int = field(init=False)
    alpha_tilde: float = field(init=False)
    data_sums: NDArray[np.float64] = field(init=False, repr=False)
    sorted_sums: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        i_cut = cut_index(self.est.n, self.alpha)
        sums = self.est.sums(self.est.data.points)
        ordered = np.sort(sums)
        sums.setflags(write=False)
        ordered.setflags(write=False)
        object.__setattr__(self, "i_cut", i_cut)
        object.__setattr__(self, "alpha_tilde", i_cut / (self.est.n + 1))
        object.__setattr__(self, "data_sums", sums)
        object.__setattr__(self, "sorted_sums", ordered)

    @property
    def n(self) -> int:
        return self.est.n

    @property
    def d(self) -> int:
        return self.est.d

    @property
    def degenerate(self) -> bool:
        return self.i_cut == 0

    @property
    def cutoff_sum(self) -> float:
        """S_(i_cut): the i_cut-th smallest unnormalized data score."""
        if self.degenerate:
            return -math.inf
        return float(self.sorted_sums[self.i_cut - 1])

    @property
    def scores(self) -> NDArray[np.float64]:
        """Sorted conformity scores p_n(Y_(1)) <= ... <= p_n(Y_(n))."""
        return self.sorted_sums / (self.n * self.est.h_pow_d)

    # ------------------------------------------------------------------
    # p-values
    # ------------------------------------------------------------------

    def pvalue_counts(self, queries: ArrayLike) -> NDArray[np.int64]:
        """(n + 1) * pi(y) for each query row."""
        q = as_points(queries, self.d)
        out = np.empty(q.shape[0], dtype=np.int64)
        for start in range(0, q.shape[0], QUERY_CHUNK):
            block = q[start : start + QUERY_CHUNK]
            out[start : start + block.shape[0]] = self._counts_block(block)
        return out

    def _counts_block(self, block: NDArray[np.float64]) -> NDArray[np.int64]:
        est = self.est
        kernel = est.kernel
        candidate = kernel_sums(est.data.points, est.bandwidth, kernel, block) + kernel.peak
        count = np.ones(block.shape[0], dtype=np.int64)
        for yi, si in zip(est.data.points, self.data_sums, strict=True):
            # The kernels are even, so K((Y_i - y)/h) == K((y - Y_i)/h) bitwise.
            augmented = si + kernel.evaluate((block - yi) / est.bandwidth)
            count += augmented <= candidate
        return count

    def pvalue_counts_direct(self, queries: ArrayLike) -> NDArray[np.int64]:
        """Definitional counts: recompute every score of aug(Y, y) per query."""
        q = as_points(queries, self.d)
        est = self.est
        out = np.empty(q.shape[0], dtype=np.int64)
        for j, y in enumerate(q):
            aug = est.data.augmented(y).points
            scores = kernel_sums(aug, est.bandwidth, est.kernel, aug)
            out[j] = int(np.count_nonzero(scores <= scores[-1]))
        return out

    def pvalues(self, queries: ArrayLike) -> NDArray[np.float64]:
        return self.pvalue_counts(queries) / (self.n + 1)

    # ------------------------------------------------------------------
    # Membership
    # ------------------------------------------------------------------

    def conformal_member(self, queries: ArrayLike) -> NDArray[np.bool_]:
        if self.degenerate:
            return np.ones(as_points(queries, self.d).shape[0], dtype=np.bool_)
        return self.pvalue_counts(queries) > self.i_cut

    def inner_member(self, queries: ArrayLike) -> NDArray[np.bool_]:
        q = as_points(queries, self.d)
        if self.degenerate:
            return np.ones(q.shape[0], dtype=np.bool_)
        return self.est.sums(q) >= self.cutoff_sum

    def outer_member(self, queries: ArrayLike) -> NDArray[np.bool_]:
        q = as_points(queries, self.d)
        if self.degenerate:
            return np.ones(q.shape[0], dtype=np.bool_)
        return self.est.sums(q) + self.est.kernel.oscillation >= self.cutoff_sum

    def member(self, kind: RegionKind | str, queries: ArrayLike) -> NDArray[np.bool_]:
        match RegionKind(kind):
            case RegionKind.CONFORMAL:
                return self.conformal_member(queries)
            case RegionKind.INNER:
                return self.inner_member(queries)
            case RegionKind.OUTER:
                return self.outer_member(queries)

    def region(self, kind: RegionKind | str = RegionKind.CONFORMAL) -> ModelRegion:
        return ModelRegion(self, RegionKind(kind))

    def cutoffs(self) -> SandwichCutoffs:
        if self.degenerate:
            return SandwichCutoffs(-math.inf, -math.inf, True)
        norm = self.n * self.est.h_pow_d
        t_minus = self.cutoff_sum / norm
        t_plus = t_minus - self.est.kernel.oscillation / norm
        return SandwichCutoffs(t_minus, t_plus, False)


@dataclass(frozen=True, eq=False)
class ModelRegion:
    """One of the three regions of a model, usable wherever a predicate is expected."""

    model: ConformalModel
    kind: RegionKind

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        return self.model.member(self.kind, points)

    def __call__(self, points: NDArray[np.float64]) -> NDArray[np.bool_]:
        return self.contains(points)


def build_model(
    data: Dataset, bandwidth: float, alpha: float, kernel: str = "epanechnikov"
) -> ConformalModel:
    return ConformalModel(make_estimate(data, bandwidth, kernel), alpha)


def conformal_pvalue(model: ConformalModel, y: ArrayLike) -> float:
    """pi(y) for a single point, via the O(n) path."""
    return float(model.pvalues(as_point(y, model.d))[0])


def conformal_pvalue_direct(model: ConformalModel, y: ArrayLike) -> float:
    """pi(y) for a single point, from its definition on aug(Y, y)."""
    count = model.pvalue_counts_direct(as_point(y, model.d))[0]
    return int(count) / (model.n + 1)


def conformal_member(model: ConformalModel, y: ArrayLike) -> bool:
    return bool(model.conformal_member(as_point(y, model.d))[0])


def sandwich_cutoffs(model: ConformalModel) -> SandwichCutoffs:
    return model.cutoffs()


def levelset_member(est: DensityEstimate, t: float, y: ArrayLike) -> bool:
    """p_n(y) >= t (non-strict)."""
    if t == -math.inf:
        as_point(y, est.d)
        return True
    return bool(est.evaluate(as_point(y, est.d))[0] >= t)
