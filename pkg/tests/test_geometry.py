"""Tests for grids, rasterized regions and volume arithmetic."""

import math

import numpy as np
import pytest

from conformal_density.errors import GridMismatchError, InvalidInputError
from conformal_density.geometry import (
    Grid,
    GridRegion,
    boundary_cell_volume,
    decode_mask,
    default_grid,
    default_resolution,
    encode_mask,
    excess_loss,
    intersection_volume,
    mc_volume,
    rasterize,
    region_from_json,
    region_to_json,
    symmetric_difference_volume,
    volume,
)
from conformal_density.io import format_json


def unit_disk(points):
    return np.sum(points**2, axis=1) <= 1.0


def always(value):
    return lambda pts: np.full(pts.shape[0], value, dtype=bool)


class TestGrid:
    """Test grid construction and cell geometry."""

    def test_cell_volume(self):
        """Product of side lengths."""
        grid = Grid((0.0, -1.0), (2.0, 1.0), (4, 8))
        assert grid.cell_volume == pytest.approx(0.5 * 0.25)
        assert grid.box_volume == 4.0
        assert grid.size == 32

    def test_centers_in_c_order(self):
        """Last axis varies fastest."""
        grid = Grid((0.0, 0.0), (2.0, 2.0), (2, 2))
        assert grid.centers().tolist() == [[0.5, 0.5], [0.5, 1.5], [1.5, 0.5], [1.5, 1.5]]

    def test_chunks_cover_all_centers(self):
        """Chunked iteration yields every center once, in order."""
        grid = Grid.uniform([0.0, 0.0], [1.0, 1.0], 7)
        chunks = list(grid.iter_center_chunks(10))
        assert np.array_equal(np.vstack(chunks), grid.centers())

    @pytest.mark.parametrize(
        ("lower", "upper", "counts"),
        [
            ((1.0,), (0.0,), (3,)),
            ((0.0,), (1.0,), (0,)),
            ((0.0,), (float("inf"),), (3,)),
            ((0.0, 0.0), (1.0,), (3,)),
        ],
    )
    def test_invalid(self, lower, upper, counts):
        """Bounds must be finite and ordered, counts positive, shapes equal."""
        with pytest.raises(InvalidInputError):
            Grid(lower, upper, counts)

    def test_locate(self):
        """Points map to the cell that contains them, -1 outside."""
        grid = Grid((0.0, 0.0), (2.0, 2.0), (2, 2))
        flat = grid.locate([[0.2, 1.7], [1.9, 0.1], [2.0, 2.0], [-0.1, 0.5]])
        assert flat.tolist() == [1, 2, 3, -1]

    def test_default_resolution(self):
        """200 cells up to d=2, 64 at d=3, refused beyond."""
        assert default_resolution(1) == default_resolution(2) == 200
        assert default_resolution(3) == 64
        with pytest.raises(InvalidInputError):
            default_resolution(4)

    def test_default_grid_bounds(self):
        """Data range plus h plus one cell on each side."""
        data = np.array([[0.0], [1.0]])
        grid = default_grid(data, 0.5, resolution=12)
        cell = 2.0 / 10
        assert grid.lower[0] == pytest.approx(-0.5 - cell)
        assert grid.upper[0] == pytest.approx(1.5 + cell)
        assert grid.counts == (12,)
        assert grid.spacing[0] == pytest.approx(cell)

    def test_default_grid_refuses_high_dimension(self):
        """No grids in four dimensions."""
        with pytest.raises(InvalidInputError):
            default_grid(np.zeros((3, 4)), 0.5)


class TestRasterize:
    """Test predicate rasterization."""

    def test_always_true_and_false(self):
        """Full and empty masks."""
        grid = Grid.uniform([0.0, 0.0], [1.0, 1.0], 10)
        assert rasterize(always(True), grid).is_full
        assert rasterize(always(False), grid).count == 0

    def test_unit_disk_area(self):
        """[-2, 2]^2 at 400x400: area within 0.01 of pi."""
        grid = Grid.uniform([-2.0, -2.0], [2.0, 2.0], 400)
        assert volume(rasterize(unit_disk, grid)) == pytest.approx(math.pi, abs=0.01)

    def test_chunk_size_is_irrelevant(self):
        """The mask does not depend on the chunking."""
        grid = Grid.uniform([-2.0, -2.0], [2.0, 2.0], 50)
        a = rasterize(unit_disk, grid, chunk_size=17)
        b = rasterize(unit_disk, grid)
        assert np.array_equal(a.mask, b.mask)

    def test_mask_size_checked(self):
        """Mask length must equal the cell count."""
        with pytest.raises(InvalidInputError):
            GridRegion(Grid((0.0,), (1.0,), (4,)), np.ones(3, dtype=bool))


class TestVolume:
    """Test volume and set arithmetic."""

    def test_full_unit_square(self):
        """Full region on [0, 1]^2 has volume 1."""
        grid = Grid.uniform([0.0, 0.0], [1.0, 1.0], 16)
        assert volume(rasterize(always(True), grid)) == pytest.approx(1.0, abs=1e-12)
        assert volume(rasterize(always(False), grid)) == 0.0

    def test_half_space(self):
        """x >= 0 on [-1, 1]^2 is 2 within one column of cells."""
        res = 201
        grid = Grid.uniform([-1.0, -1.0], [1.0, 1.0], res)
        r = rasterize(lambda p: p[:, 0] >= 0.0, grid)
        assert abs(r.volume - 2.0) <= grid.cell_volume * res

    def test_symmetric_difference_identity(self, rng):
        """mu(a xor b) = mu(a) + mu(b) - 2 mu(a and b), exactly in cell counts."""
        grid = Grid.uniform([0.0, 0.0], [3.0, 2.0], 30)
        for _ in range(20):
            a = GridRegion(grid, rng.random(grid.size) < 0.4)
            b = GridRegion(grid, rng.random(grid.size) < 0.6)
            xor_cells = symmetric_difference_volume(a, b) / grid.cell_volume
            inter_cells = intersection_volume(a, b) / grid.cell_volume
            assert round(xor_cells) == a.count + b.count - 2 * round(inter_cells)

    def test_symmetric_difference_extremes(self):
        """a = b gives 0; full vs empty gives the box."""
        grid = Grid.uniform([0.0], [5.0], 10)
        full = rasterize(always(True), grid)
        empty = rasterize(always(False), grid)
        assert symmetric_difference_volume(full, full) == 0.0
        assert symmetric_difference_volume(full, empty) == pytest.approx(5.0)

    def test_excess_loss(self, rng):
        """Signed volume difference, bounded by the symmetric difference for supersets."""
        grid = Grid.uniform([0.0, 0.0], [1.0, 1.0], 20)
        oracle = GridRegion(grid, rng.random(grid.size) < 0.3)
        bigger = GridRegion(grid, oracle.mask | (rng.random(grid.size) < 0.3))
        assert excess_loss(oracle, oracle) == 0.0
        assert excess_loss(bigger, oracle) >= 0.0
        assert excess_loss(bigger, oracle) <= symmetric_difference_volume(bigger, oracle) + 1e-12
        assert excess_loss(oracle, bigger) <= 0.0

    def test_monotone(self, rng):
        """Subset masks never have larger volume."""
        grid = Grid.uniform([0.0], [1.0], 100)
        big = GridRegion(grid, rng.random(100) < 0.5)
        small = GridRegion(grid, big.mask & (rng.random(100) < 0.5))
        assert small.is_subset_of(big)
        assert small.volume <= big.volume

    def test_grid_mismatch(self):
        """Different grids cannot be compared."""
        a = rasterize(always(True), Grid.uniform([0.0], [1.0], 10))
        b = rasterize(always(True), Grid.uniform([0.0], [1.0], 11))
        with pytest.raises(GridMismatchError):
            symmetric_difference_volume(a, b)
        with pytest.raises(InvalidInputError):
            excess_loss(a, b)

    def test_touches_boundary(self):
        """Only set cells on an outer face count."""
        grid = Grid.uniform([-2.0, -2.0], [2.0, 2.0], 40)
        assert not rasterize(unit_disk, grid).touches_boundary
        assert rasterize(lambda p: p[:, 0] > 1.0, grid).touches_boundary

    def test_contains_lookup(self):
        """Arbitrary points inherit the flag of their cell."""
        grid = Grid.uniform([-2.0, -2.0], [2.0, 2.0], 100)
        r = rasterize(unit_disk, grid)
        flags = r.contains([[0.0, 0.0], [1.9, 1.9], [5.0, 0.0]])
        assert flags.tolist() == [True, False, False]

    def test_refinement_within_boundary_estimate(self):
        """Doubling resolution moves the disk area by less than twice the boundary cells."""
        coarse = rasterize(unit_disk, Grid.uniform([-2.0, -2.0], [2.0, 2.0], 100))
        fine = rasterize(unit_disk, Grid.uniform([-2.0, -2.0], [2.0, 2.0], 200))
        assert abs(fine.volume - coarse.volume) < 2.0 * boundary_cell_volume(coarse)


class TestMcVolume:
    """Test Monte-Carlo volumes."""

    def test_always_true(self):
        """Box volume exactly with zero SE."""
        est, se = mc_volume(always(True), [0.0, 0.0], [2.0, 3.0], 1000, seed=1)
        assert est == 6.0
        assert se == 0.0

    def test_unit_disk(self):
        """pi within 3 SE from 10^6 samples."""
        est, se = mc_volume(unit_disk, [-2.0, -2.0], [2.0, 2.0], 1_000_000, seed=3)
        assert abs(est - math.pi) <= 3.0 * se

    def test_deterministic(self):
        """Same seed, same answer."""
        a = mc_volume(unit_disk, [-2.0, -2.0], [2.0, 2.0], 5000, seed=11)
        b = mc_volume(unit_disk, [-2.0, -2.0], [2.0, 2.0], 5000, seed=11)
        assert a == b

    def test_minimum_samples(self):
        """Fewer than 100 samples is invalid input."""
        with pytest.raises(InvalidInputError):
            mc_volume(unit_disk, [-1.0], [1.0], 99, seed=0)


class TestRegionJson:
    """Test the run-length-encoded export."""

    def test_encode_mask(self):
        """First value plus run lengths."""
        mask = np.array([False, False, True, True, True, False])
        assert encode_mask(mask) == {"first": 0, "runs": [2, 3, 1]}
        assert decode_mask({"first": 0, "runs": [2, 3, 1]}, 6).tolist() == mask.tolist()

    def test_decode_rejects_bad_runs(self):
        """Run lengths must add up to the cell count."""
        with pytest.raises(InvalidInputError):
            decode_mask({"first": 1, "runs": [2, 2]}, 5)

    def test_document_reloads(self):
        """Export then import yields the same grid and mask."""
        grid = Grid.uniform([-2.0, -2.0], [2.0, 2.0], 30)
        r = rasterize(unit_disk, grid)
        doc = region_to_json(r)
        assert doc["format"] == "grid-region"
        assert doc["volume"] == r.volume
        back = region_from_json(doc)
        assert back.grid == grid
        assert np.array_equal(back.mask, r.mask)

    def test_export_is_byte_stable(self):
        """Two exports of the same region format to the same text."""
        grid = Grid.uniform([-2.0], [2.0], 50)
        a = format_json(region_to_json(rasterize(unit_disk, grid)))
        b = format_json(region_to_json(rasterize(unit_disk, grid)))
        assert a == b

    def test_rejects_foreign_document(self):
        """Documents without the format marker are refused."""
        with pytest.raises(InvalidInputError):
            region_from_json({"lower": [0.0], "upper": [1.0], "counts": [1]})
