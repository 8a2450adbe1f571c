"""Compactly supported product kernels.

Each family is a univariate kernel on [-1, 1] extended to R^d by taking the
product over coordinates. All provided families are nonnegative, peak at the
origin and vanish outside the unit cube, so the oscillation
``psi = sup |K(u) - K(u')|`` equals the peak ``K(0)``.

Available families:
    - ``epanechnikov``  (3/4)(1 - u^2)
    - ``biweight``      (15/16)(1 - u^2)^2
    - ``triweight``     (35/32)(1 - u^2)^3
    - ``uniform-box``   1/2
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TypedDict

import numpy as np
from numpy.typing import ArrayLike, NDArray

from conformal_density.errors import InvalidInputError

DEFAULT_KERNEL = "epanechnikov"

# Gauss-Legendre nodes per axis; exact for every family's polynomial degree
# plus moments of order < 20.
DEFAULT_QUADRATURE_NODES = 16


class KernelFamily(StrEnum):
    EPANECHNIKOV = "epanechnikov"
    BIWEIGHT = "biweight"
    TRIWEIGHT = "triweight"
    UNIFORM_BOX = "uniform-box"


def _epanechnikov(u: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _biweight(u: NDArray[np.float64]) -> NDArray[np.float64]:
    s = 1.0 - u * u
    return np.where(np.abs(u) <= 1.0, 0.9375 * s * s, 0.0)


def _triweight(u: NDArray[np.float64]) -> NDArray[np.float64]:
    s = 1.0 - u * u
    return np.where(np.abs(u) <= 1.0, 1.09375 * s * s * s, 0.0)


def _uniform_box(u: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.where(np.abs(u) <= 1.0, 0.5, 0.0)


_UNIVARIATE: dict[KernelFamily, Callable[[NDArray[np.float64]], NDArray[np.float64]]] = {
    KernelFamily.EPANECHNIKOV: _epanechnikov,
    KernelFamily.BIWEIGHT: _biweight,
    KernelFamily.TRIWEIGHT: _triweight,
    KernelFamily.UNIFORM_BOX: _uniform_box,
}

# Polynomial degree of each univariate piece on [-1, 1].
_DEGREE: dict[KernelFamily, int] = {
    KernelFamily.EPANECHNIKOV: 2,
    KernelFamily.BIWEIGHT: 4,
    KernelFamily.TRIWEIGHT: 6,
    KernelFamily.UNIFORM_BOX: 0,
}


def kernel_names() -> list[str]:
    """Names accepted by ``product_kernel`` and the ``--kernel`` flag."""
    return [f.value for f in KernelFamily]


def parse_family(family: str | KernelFamily) -> KernelFamily:
    """Resolve a family name, raising ``InvalidInputError`` for unknown names."""
    try:
        return KernelFamily(family)
    except ValueError as e:
        raise InvalidInputError(
            f"Unknown kernel family {family!r}; expected one of {kernel_names()}"
        ) from e


@dataclass(frozen=True)
class KernelSpec:
    """A d-dimensional product kernel supported on [-1, 1]^d.

    ``peak`` is computed by evaluating the kernel at the origin, so it is the
    exact floating-point value every evaluation of ``K(0)`` returns.
    """

    family: KernelFamily
    dimension: int
    peak: float = field(init=False)
    oscillation: float = field(init=False)
    support_radius: float = field(init=False, default=1.0)

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise InvalidInputError(f"Kernel dimension must be >= 1, got {self.dimension}")
        peak = float(self.evaluate(np.zeros((1, self.dimension)))[0])
        object.__setattr__(self, "peak", peak)
        # Nonnegative families vanish outside the support, so min over R^d is 0.
        object.__setattr__(self, "oscillation", peak - 0.0)

    @property
    def univariate(self) -> Callable[[NDArray[np.float64]], NDArray[np.float64]]:
        return _UNIVARIATE[self.family]

    @property
    def degree(self) -> int:
        """Polynomial degree of the univariate factor on its support."""
        return _DEGREE[self.family]

    def evaluate(self, u: ArrayLike) -> NDArray[np.float64]:
        """Evaluate K at each row of ``u`` (shape ``(..., d)``).

        The product is accumulated coordinate by coordinate, left to right,
        so the result is bit-identical to multiplying univariate values in order.
        """
        arr = np.asarray(u, dtype=np.float64)
        if arr.shape[-1] != self.dimension:
            raise InvalidInputError(
                f"Kernel of dimension {self.dimension} evaluated at points of dimension "
                f"{arr.shape[-1]}"
            )
        factors = self.univariate(arr)
        out = factors[..., 0]
        for j in range(1, self.dimension):
            out = out * factors[..., j]
        return out


def product_kernel(family: str | KernelFamily = DEFAULT_KERNEL, d: int = 1) -> KernelSpec:
    """Build the d-fold product kernel of a univariate family."""
    if d <= 0:
        raise InvalidInputError(f"Kernel dimension must be >= 1, got {d}")
    return KernelSpec(parse_family(family), d)


def eval_kernel(k: KernelSpec, u: ArrayLike) -> float:
    """Evaluate ``k`` at a single point ``u``."""
    point = np.asarray(u, dtype=np.float64).reshape(-1)
    if point.shape[0] != k.dimension:
        raise InvalidInputError(
            f"Point has dimension {point.shape[0]}, kernel has dimension {k.dimension}"
        )
    if not np.all(np.isfinite(point)):
        raise InvalidInputError(f"Kernel evaluated at non-finite point {point.tolist()}")
    return float(k.evaluate(point[np.newaxis, :])[0])


# ============================================================================
# Quadrature and moment validation
# ============================================================================


def _tensor_rule(d: int, nodes: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Tensor Gauss-Legendre rule on [-1, 1]^d: (points (N, d), weights (N,))."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    points = np.stack([g.reshape(-1) for g in grids], axis=-1)
    weights = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=-1), axis=-1)
    return points, weights


def kernel_integral(k: KernelSpec, nodes: int = DEFAULT_QUADRATURE_NODES) -> float:
    """Integral of ``k`` over its support by tensor Gauss-Legendre quadrature."""
    points, weights = _tensor_rule(k.dimension, nodes)
    return float(np.sum(weights * k.evaluate(points)))


def multi_indices(d: int, max_order: int) -> list[tuple[int, ...]]:
    """All multi-indices s in N^d with 1 <= |s| <= max_order, by total degree."""
    out: list[tuple[int, ...]] = []
    for order in range(1, max_order + 1):
        for s in itertools.product(range(order + 1), repeat=d):
            if sum(s) == order:
                out.append(s)
    return out


class MomentCheck(TypedDict):
    index: tuple[int, ...]
    value: float
    passed: bool


class KernelValidation(TypedDict):
    """Outcome of ``validate_beta``: per-moment checks plus message lists."""

    beta: float
    tolerance: float
    integral: float
    moments: list[MomentCheck]
    errors: list[str]
    correct: list[str]
    passed: bool


def validate_beta(k: KernelSpec, beta: float, tol: float = 1e-10) -> KernelValidation:
    """Check the moment conditions of a beta-valid kernel numerically.

    Integrates y^s K(y) over [-1, 1]^d for every multi-index with
    1 <= |s| <= floor(beta) and reports each one. The normalization
    integral is checked against 1 with the same tolerance.
    """
    if tol <= 0:
        raise InvalidInputError(f"Tolerance must be > 0, got {tol}")
    if beta <= 0:
        raise InvalidInputError(f"beta must be > 0, got {beta}")

    max_order = math.floor(beta)
    nodes = max(DEFAULT_QUADRATURE_NODES, (k.degree + max_order) // 2 + 2)
    points, weights = _tensor_rule(k.dimension, nodes)
    kvals = weights * k.evaluate(points)

    results: KernelValidation = {
        "beta": float(beta),
        "tolerance": float(tol),
        "integral": float(np.sum(kvals)),
        "moments": [],
        "errors": [],
        "correct": [],
        "passed": True,
    }

    if abs(results["integral"] - 1.0) < tol:
        results["correct"].append(f"Kernel integrates to 1 (|err| < {tol:g})")
    else:
        results["errors"].append(f"Kernel integral {results['integral']!r} differs from 1")

    for s in multi_indices(k.dimension, max_order):
        monomial = np.prod(points ** np.asarray(s, dtype=np.float64), axis=-1)
        value = float(np.sum(kvals * monomial))
        ok = abs(value) < tol
        results["moments"].append({"index": s, "value": value, "passed": ok})
        if ok:
            results["correct"].append(f"Moment s={s} vanishes")
        else:
            results["errors"].append(f"Moment s={s} = {value!r} does not vanish")

    results["passed"] = not results["errors"]
    return results
