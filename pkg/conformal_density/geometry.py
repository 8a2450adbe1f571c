"""Rectangular grids, rasterized regions, and the volume arithmetic on them.

A region is represented by a boolean mask over the cells of a ``Grid``,
each cell tested at its center. Masks are stored flat in C order (last axis
fastest), which is also the order of ``Grid.centers()`` and of the
run-length encoding used by ``region_to_json``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from conformal_density.errors import GridMismatchError, InvalidInputError

Predicate = Callable[[NDArray[np.float64]], NDArray[np.bool_]]

DEFAULT_CHUNK_SIZE = 65536
MIN_MC_SAMPLES = 100
REGION_FORMAT = "grid-region"
REGION_FORMAT_VERSION = 1


def default_resolution(d: int) -> int:
    """Cells per axis: 200 up to d = 2, 64 for d = 3. Grids are refused beyond that."""
    if d <= 0:
        raise InvalidInputError(f"Dimension must be >= 1, got {d}")
    if d <= 2:
        return 200
    if d == 3:
        return 64
    raise InvalidInputError(f"Grid volumes are not supported for d = {d}; use mc_volume")


@dataclass(frozen=True)
class Grid:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        lower = tuple(float(x) for x in self.lower)
        upper = tuple(float(x) for x in self.upper)
        counts = tuple(int(c) for c in self.counts)
        if not (len(lower) == len(upper) == len(counts)) or not lower:
            raise InvalidInputError("Grid bounds and counts must share one nonzero dimension")
        for j, (lo, hi, c) in enumerate(zip(lower, upper, counts, strict=True)):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise InvalidInputError(f"Grid bounds must be finite (axis {j})")
            if not lo < hi:
                raise InvalidInputError(f"Grid axis {j}: lower {lo} must be < upper {hi}")
            if c < 1:
                raise InvalidInputError(f"Grid axis {j}: cell count must be >= 1, got {c}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def uniform(cls, lower: ArrayLike, upper: ArrayLike, resolution: int) -> Grid:
        lo = np.atleast_1d(np.asarray(lower, dtype=np.float64))
        return cls(tuple(lo), tuple(np.atleast_1d(upper)), (int(resolution),) * lo.shape[0])

    @property
    def dimension(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return math.prod(self.counts)

    @property
    def lower_array(self) -> NDArray[np.float64]:
        return np.asarray(self.lower, dtype=np.float64)

    @property
    def upper_array(self) -> NDArray[np.float64]:
        return np.asarray(self.upper, dtype=np.float64)

    @property
    def spacing(self) -> NDArray[np.float64]:
        return (self.upper_array - self.lower_array) / np.asarray(self.counts, dtype=np.float64)

    @property
    def cell_volume(self) -> float:
        vol = 1.0
        for side in self.spacing:
            vol *= float(side)
        return vol

    @property
    def box_volume(self) -> float:
        vol = 1.0
        for lo, hi in zip(self.lower, self.upper, strict=True):
            vol *= hi - lo
        return vol

    def axis_centers(self, axis: int) -> NDArray[np.float64]:
        step = self.spacing[axis]
        return self.lower[axis] + (np.arange(self.counts[axis]) + 0.5) * step

    def centers_for(self, flat_index: NDArray[np.intp]) -> NDArray[np.float64]:
        """Centers of the cells with the given C-order flat indices."""
        multi = np.unravel_index(flat_index, self.counts)
        cols = [self.axis_centers(j)[multi[j]] for j in range(self.dimension)]
        return np.stack(cols, axis=-1)

    def centers(self) -> NDArray[np.float64]:
        return self.centers_for(np.arange(self.size))

    def iter_center_chunks(self, chunk_size: int = DEFAULT_CHUNK_SIZE) -> Iterator[NDArray[np.float64]]:
        for start in range(0, self.size, chunk_size):
            stop = min(start + chunk_size, self.size)
            yield self.centers_for(np.arange(start, stop))

    def locate(self, points: ArrayLike) -> NDArray[np.intp]:
        """Flat index of the cell containing each point, -1 outside the grid."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        rel = (pts - self.lower_array) / self.spacing
        idx = np.floor(rel).astype(np.intp)
        counts = np.asarray(self.counts)
        # Points on the upper face belong to the last cell.
        on_upper = pts == self.upper_array
        idx = np.where(on_upper, counts - 1, idx)
        inside = np.all((idx >= 0) & (idx < counts), axis=1)
        flat = np.full(pts.shape[0], -1, dtype=np.intp)
        if np.any(inside):
            flat[inside] = np.ravel_multi_index(tuple(idx[inside].T), self.counts)
        return flat


def default_grid(data: ArrayLike, bandwidth: float, resolution: int | None = None) -> Grid:
    """Data range expanded by ``h`` plus one cell on each side."""
    pts = np.asarray(data, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    d = pts.shape[1]
    res = default_resolution(d) if resolution is None else int(resolution)
    if res < 3:
        raise InvalidInputError(f"Grid resolution must be >= 3, got {res}")
    if d > 3:
        raise InvalidInputError(f"Grid volumes are not supported for d = {d}; use mc_volume")
    lo = pts.min(axis=0) - bandwidth
    hi = pts.max(axis=0) + bandwidth
    # Interior spans res - 2 cells so one extra cell sits on each side.
    cell = (hi - lo) / (res - 2)
    return Grid(tuple(lo - cell), tuple(hi + cell), (res,) * d)


@dataclass(frozen=True, eq=False)
class GridRegion:
    grid: Grid
    mask: NDArray[np.bool_]

    def __post_init__(self) -> None:
        mask = np.asarray(self.mask, dtype=np.bool_).reshape(-1)
        if mask.shape[0] != self.grid.size:
            raise InvalidInputError(
                f"Mask has {mask.shape[0]} cells, grid has {self.grid.size}"
            )
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def volume(self) -> float:
        return self.count * self.grid.cell_volume

    @property
    def is_full(self) -> bool:
        return bool(np.all(self.mask))

    @property
    def touches_boundary(self) -> bool:
        """True when any cell on an outer face of the grid is set."""
        cube = self.mask.reshape(self.grid.counts)
        for axis in range(self.grid.dimension):
            if np.any(np.take(cube, 0, axis=axis)) or np.any(np.take(cube, -1, axis=axis)):
                return True
        return False

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        """Lookup membership of arbitrary points; points outside the grid are not members."""
        flat = self.grid.locate(points)
        out = np.zeros(flat.shape[0], dtype=np.bool_)
        inside = flat >= 0
        out[inside] = self.mask[flat[inside]]
        return out

    def is_subset_of(self, other: GridRegion) -> bool:
        _require_same_grid(self, other)
        return not bool(np.any(self.mask & ~other.mask))


def _require_same_grid(a: GridRegion, b: GridRegion) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"Regions live on different grids: {a.grid} vs {b.grid}")


def rasterize(membership: Predicate, grid: Grid, chunk_size: int = DEFAULT_CHUNK_SIZE) -> GridRegion:
    """Evaluate a vectorized membership predicate at every cell center."""
    parts = [
        np.asarray(membership(chunk), dtype=np.bool_).reshape(-1)
        for chunk in grid.iter_center_chunks(chunk_size)
    ]
    return GridRegion(grid, np.concatenate(parts))


def volume(r: GridRegion) -> float:
    return r.volume


def intersection_volume(a: GridRegion, b: GridRegion) -> float:
    _require_same_grid(a, b)
    return int(np.count_nonzero(a.mask & b.mask)) * a.grid.cell_volume


def symmetric_difference_volume(a: GridRegion, b: GridRegion) -> float:
    """mu(a xor b) on a shared grid."""
    _require_same_grid(a, b)
    return int(np.count_nonzero(a.mask ^ b.mask)) * a.grid.cell_volume


def excess_loss(c: GridRegion, oracle: GridRegion) -> float:
    """mu(c) - mu(oracle); negative for regions smaller than the oracle."""
    _require_same_grid(c, oracle)
    return (c.count - oracle.count) * c.grid.cell_volume


def boundary_cell_volume(r: GridRegion) -> float:
    """Volume of set cells that have an unset axis neighbour inside the grid."""
    cube = r.mask.reshape(r.grid.counts)
    edge = np.zeros_like(cube)
    for axis in range(cube.ndim):
        fwd = np.zeros_like(cube)
        bwd = np.zeros_like(cube)
        lead = [slice(None)] * cube.ndim
        tail = [slice(None)] * cube.ndim
        lead[axis] = slice(1, None)
        tail[axis] = slice(None, -1)
        fwd[tuple(tail)] = cube[tuple(tail)] & ~cube[tuple(lead)]
        bwd[tuple(lead)] = cube[tuple(lead)] & ~cube[tuple(tail)]
        edge |= fwd | bwd
    return int(np.count_nonzero(edge)) * r.grid.cell_volume


def mc_volume(
    membership: Predicate,
    lower: ArrayLike,
    upper: ArrayLike,
    samples: int,
    seed: int | np.random.SeedSequence,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> tuple[float, float]:
    """Monte-Carlo volume of a region inside the box [lower, upper].

    Returns ``(estimate, standard_error)`` with estimate = box volume times
    the hit fraction. Deterministic for a given seed.
    """
    if samples < MIN_MC_SAMPLES:
        raise InvalidInputError(f"mc_volume needs at least {MIN_MC_SAMPLES} samples, got {samples}")
    lo = np.atleast_1d(np.asarray(lower, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(upper, dtype=np.float64))
    if lo.shape != hi.shape or np.any(lo >= hi):
        raise InvalidInputError("mc_volume box needs lower < upper on every axis")
    box = Grid(tuple(lo), tuple(hi), (1,) * lo.shape[0]).box_volume

    rng = np.random.default_rng(seed)
    hits = 0
    remaining = samples
    while remaining > 0:
        take = min(chunk_size, remaining)
        pts = rng.uniform(lo, hi, size=(take, lo.shape[0]))
        hits += int(np.count_nonzero(membership(pts)))
        remaining -= take
    p = hits / samples
    return box * p, box * math.sqrt(p * (1.0 - p) / samples)


# ============================================================================
# JSON export
# ============================================================================


def encode_mask(mask: NDArray[np.bool_]) -> dict[str, Any]:
    """Run-length encode a flat mask as its first value plus run lengths."""
    flat = np.asarray(mask, dtype=np.bool_).reshape(-1)
    if flat.size == 0:
        return {"first": 0, "runs": []}
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    return {"first": int(flat[0]), "runs": np.diff(bounds).astype(int).tolist()}


def decode_mask(rle: dict[str, Any], size: int) -> NDArray[np.bool_]:
    runs = [int(r) for r in rle["runs"]]
    if sum(runs) != size or any(r <= 0 for r in runs):
        raise InvalidInputError(f"Run lengths do not describe a mask of {size} cells")
    value = bool(rle["first"])
    parts = []
    for r in runs:
        parts.append(np.full(r, value, dtype=np.bool_))
        value = not value
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.bool_)


def region_to_json(r: GridRegion) -> dict[str, Any]:
    return {
        "format": REGION_FORMAT,
        "version": REGION_FORMAT_VERSION,
        "lower": list(r.grid.lower),
        "upper": list(r.grid.upper),
        "counts": list(r.grid.counts),
        "cell_volume": r.grid.cell_volume,
        "volume": r.volume,
        "mask": encode_mask(r.mask),
    }


def region_from_json(data: dict[str, Any]) -> GridRegion:
    if data.get("format") != REGION_FORMAT:
        raise InvalidInputError(f"Not a {REGION_FORMAT} document")
    grid = Grid(tuple(data["lower"]), tuple(data["upper"]), tuple(data["counts"]))
    return GridRegion(grid, decode_mask(data["mask"], grid.size))
