"""Tests for mixture densities, oracle cutoffs and oracle regions."""

import math

import numpy as np
import pytest
from scipy import stats

from conformal_density.errors import GridTooSmallError, InvalidInputError, PlateauError
from conformal_density.geometry import Grid, rasterize
from conformal_density.oracle import (
    MixtureDensity,
    OracleCutoff,
    check_plateau,
    loss_against_oracle,
    mixture_pdf,
    oracle_cutoff,
    oracle_region,
    quadrature_cutoff,
    quantile_with_error,
    region_mass,
    sample_density_values,
    standard_normal,
)

PHI_1645 = stats.norm.pdf(stats.norm.ppf(0.95))


def _textbook_pdf(m, y):
    total = 0.0
    for w, mu, cov in zip(m.weights, m.means, m.covariances, strict=True):
        diff = y - mu
        quad = diff @ np.linalg.inv(cov) @ diff
        norm = math.sqrt((2 * math.pi) ** len(mu) * np.linalg.det(cov))
        total += w * math.exp(-0.5 * quad) / norm
    return total


class TestMixtureDensity:
    """Test mixture construction and evaluation."""

    def test_standard_normal_at_zero(self):
        """1 / sqrt(2 pi)."""
        assert mixture_pdf(standard_normal(1), [0.0]) == pytest.approx(1 / math.sqrt(2 * math.pi))

    def test_symmetric_two_component(self):
        """At 0 the equal mixture of N(+-m, 1) equals either component."""
        m = MixtureDensity([0.5, 0.5], [[-1.5], [1.5]], [[[1.0]], [[1.0]]])
        single = stats.norm.pdf(1.5)
        assert mixture_pdf(m, [0.0]) == pytest.approx(single, rel=1e-12)

    def test_matches_textbook_formula(self, rng):
        """Random mixture at random points, to 1e-12."""
        a = rng.standard_normal((2, 2))
        b = rng.standard_normal((2, 2))
        m = MixtureDensity(
            [0.3, 0.7],
            rng.standard_normal((2, 2)),
            np.stack([a @ a.T + np.eye(2), b @ b.T + 0.5 * np.eye(2)]),
        )
        for y in rng.standard_normal((10, 2)):
            assert m.pdf(y)[0] == pytest.approx(_textbook_pdf(m, y), abs=1e-12)

    @pytest.mark.parametrize(
        ("weights", "means", "covs"),
        [
            ([0.5, 0.6], [[0.0], [1.0]], [[[1.0]], [[1.0]]]),
            ([1.0], [[0.0]], [[[-1.0]]]),
            ([1.0], [[0.0, 0.0]], [[[1.0, 0.5], [0.4, 1.0]]]),
            ([0.5, 0.5], [[0.0]], [[[1.0]], [[1.0]]]),
            ([-0.5, 1.5], [[0.0], [1.0]], [[[1.0]], [[1.0]]]),
        ],
    )
    def test_invalid_parameters(self, weights, means, covs):
        """Weights must be positive and sum to 1; covariances symmetric PD; shapes agree."""
        with pytest.raises(InvalidInputError):
            MixtureDensity(weights, means, covs)

    def test_dimension_mismatch(self):
        """A 3-d point against a 2-d mixture is invalid input."""
        with pytest.raises(InvalidInputError):
            standard_normal(2).pdf(np.zeros((1, 3)))

    def test_sampling_moments(self, rng):
        """Sample mean and covariance match the mixture."""
        m = MixtureDensity([1.0], [[1.0, -2.0]], [[[2.0, 0.6], [0.6, 1.0]]])
        draws = m.sample(200_000, rng)
        assert np.allclose(draws.mean(axis=0), [1.0, -2.0], atol=0.02)
        assert np.allclose(np.cov(draws.T), [[2.0, 0.6], [0.6, 1.0]], atol=0.03)

    def test_config_round_trip(self):
        """to_config output rebuilds the same mixture."""
        m = MixtureDensity([0.5, 0.5], [[1.5, 0.0], [0.0, 1.5]], [np.eye(2), 2 * np.eye(2)])
        again = MixtureDensity.from_config(m.to_config())
        assert np.array_equal(again.covariances, m.covariances)
        assert (again.d, again.k) == (2, 2)


class TestOracleCutoff:
    """Test the Monte-Carlo cutoff."""

    def test_standard_normal_1d(self):
        """alpha=0.1: phi(1.6449) within 1%."""
        cut = oracle_cutoff(standard_normal(1), 0.1, 1_000_000, seed=5)
        assert cut.value == pytest.approx(PHI_1645, rel=0.01)
        assert 0.0 < cut.standard_error < 0.01 * PHI_1645

    def test_standard_normal_2d(self):
        """alpha=0.1: (2 pi)^-1 * 0.1 within 1%."""
        cut = oracle_cutoff(standard_normal(2), 0.1, 1_000_000, seed=6)
        assert cut.value == pytest.approx(0.1 / (2 * math.pi), rel=0.01)

    def test_small_alpha_approaches_zero(self):
        """The cutoff shrinks toward 0 as alpha does."""
        m = standard_normal(1)
        big = oracle_cutoff(m, 0.2, 50_000, seed=1).value
        tiny = oracle_cutoff(m, 1e-4, 50_000, seed=1).value
        assert tiny < big
        assert tiny < 0.01

    def test_monotone_in_alpha(self):
        """alpha1 < alpha2 gives t1 <= t2 on the same draws."""
        m = standard_normal(2)
        values = [oracle_cutoff(m, a, 20_000, seed=9).value for a in (0.05, 0.1, 0.3, 0.6)]
        assert values == sorted(values)

    def test_independent_of_threads(self):
        """Worker count never changes the draws."""
        m = standard_normal(2)
        serial = sample_density_values(m, 150_000, seed=4, threads=1)
        threaded = sample_density_values(m, 150_000, seed=4, threads=3)
        assert np.array_equal(serial, threaded)

    def test_validation(self):
        """alpha in (0, 1) and at least 10^4 samples."""
        with pytest.raises(InvalidInputError):
            oracle_cutoff(standard_normal(1), 1.0, 20_000)
        with pytest.raises(InvalidInputError):
            oracle_cutoff(standard_normal(1), 0.1, 9_999)

    def test_plateau_rejected(self):
        """Too many values tied with the cutoff raise PlateauError."""
        values = np.concatenate([np.full(500, 0.25), np.linspace(0.3, 1.0, 9500)])
        with pytest.raises(PlateauError):
            check_plateau(values, 0.25)
        check_plateau(np.linspace(0.0, 1.0, 10_000), 0.5)

    def test_quantile_order_statistic(self):
        """The ceil(alpha N)-th smallest value."""
        values = np.arange(1.0, 1001.0)
        value, se = quantile_with_error(values[::-1].copy(), 0.1)
        assert value == 100.0
        assert se > 0.0


class TestQuadratureCutoff:
    """Test the deterministic grid cutoff."""

    def test_standard_normal_1d(self):
        """alpha=0.1 on a fine grid: phi(1.6449) within 0.1%."""
        cut = quadrature_cutoff(standard_normal(1), 0.1, Grid.uniform([-8.0], [8.0], 16_000))
        assert cut.value == pytest.approx(PHI_1645, rel=1e-3)
        assert (cut.standard_error, cut.mc_samples) == (0.0, 0)

    def test_standard_normal_2d(self):
        """alpha=0.1: (2 pi)^-1 * 0.1 within 0.5%."""
        grid = Grid.uniform([-6.0, -6.0], [6.0, 6.0], 600)
        cut = quadrature_cutoff(standard_normal(2), 0.1, grid)
        assert cut.value == pytest.approx(0.1 / (2 * math.pi), rel=5e-3)

    def test_agrees_with_monte_carlo(self):
        """Both cutoffs agree within a few Monte-Carlo standard errors."""
        m = MixtureDensity(
            np.array([0.3, 0.7]), np.array([[-2.0], [1.5]]), np.array([[[0.5]], [[1.0]]])
        )
        quad = quadrature_cutoff(m, 0.2, Grid.uniform([-8.0], [8.0], 8000))
        mc = oracle_cutoff(m, 0.2, 400_000, seed=21)
        assert abs(quad.value - mc.value) <= 5.0 * mc.standard_error + 1e-4

    def test_deterministic(self):
        """Repeated calls give the same cutoff."""
        grid = Grid.uniform([-5.0, -5.0], [5.0, 5.0], 120)
        m = standard_normal(2)
        assert quadrature_cutoff(m, 0.1, grid) == quadrature_cutoff(m, 0.1, grid)

    def test_grid_missing_too_much_mass(self):
        """More than alpha outside the grid raises GridTooSmallError."""
        with pytest.raises(GridTooSmallError):
            quadrature_cutoff(standard_normal(1), 0.1, Grid.uniform([-1.0], [1.0], 200))

    def test_validation(self):
        """alpha in (0, 1) and matching dimensions."""
        with pytest.raises(InvalidInputError):
            quadrature_cutoff(standard_normal(1), 0.0, Grid.uniform([-4.0], [4.0], 100))
        with pytest.raises(InvalidInputError):
            quadrature_cutoff(standard_normal(2), 0.1, Grid.uniform([-4.0], [4.0], 100))


class TestOracleRegion:
    """Test the rasterized oracle set and losses."""

    def test_interval_1d(self):
        """alpha=0.1: volume about 3.29."""
        grid = Grid.uniform([-4.0], [4.0], 4000)
        region, raster = oracle_region(standard_normal(1), 0.1, grid, 200_000, seed=2)
        assert raster.volume == pytest.approx(2 * 1.6449, rel=0.01)
        assert region.alpha == 0.1
        cube = raster.mask
        assert np.array_equal(cube, cube[::-1])

    def test_disk_2d(self):
        """alpha=0.1: area pi * (-2 ln 0.1) within 1%."""
        grid = Grid.uniform([-4.0, -4.0], [4.0, 4.0], 300)
        _, raster = oracle_region(standard_normal(2), 0.1, grid, 200_000, seed=3)
        assert raster.volume == pytest.approx(math.pi * -2 * math.log(0.1), rel=0.01)

    def test_grid_too_small(self):
        """A grid inside the region raises GridTooSmallError."""
        grid = Grid.uniform([-1.0], [1.0], 100)
        with pytest.raises(GridTooSmallError):
            oracle_region(standard_normal(1), 0.1, grid, 20_000, seed=1)

    def test_dimension_mismatch(self):
        """Grid and mixture dimensions must agree."""
        with pytest.raises(InvalidInputError):
            oracle_region(standard_normal(2), 0.1, Grid.uniform([-4.0], [4.0], 10), 20_000)

    def test_precomputed_cutoff_is_used(self):
        """Passing a cutoff skips sampling."""
        cut = OracleCutoff(PHI_1645, 0.0, 0.1, 0, 0)
        grid = Grid.uniform([-4.0], [4.0], 800)
        region, _ = oracle_region(standard_normal(1), 0.1, grid, cutoff=cut)
        assert region.cutoff is cut

    def test_losses(self):
        """Identical regions lose nothing; the whole box loses box minus oracle."""
        grid = Grid.uniform([-4.0, -4.0], [4.0, 4.0], 100)
        _, oracle = oracle_region(standard_normal(2), 0.1, grid, 20_000, seed=8)
        assert loss_against_oracle(oracle, oracle) == (0.0, 0.0)
        whole = rasterize(lambda p: np.ones(p.shape[0], dtype=bool), grid)
        sym, exc = loss_against_oracle(whole, oracle)
        assert sym == pytest.approx(grid.box_volume - oracle.volume)
        assert exc == pytest.approx(grid.box_volume - oracle.volume)

    def test_region_mass_near_nominal(self):
        """P(oracle region) is 1 - alpha within 3 SE of a fresh estimate."""
        m = standard_normal(2)
        cut = oracle_cutoff(m, 0.1, 200_000, seed=12)
        region, _ = oracle_region(m, 0.1, Grid.uniform([-4.0, -4.0], [4.0, 4.0], 50), cutoff=cut)
        p, se = region_mass(region.contains, m, 100_000, seed=13)
        tolerance = 3.0 * math.hypot(se, cut.standard_error * 0.1 / cut.value) + 0.003
        assert abs(p - 0.9) <= tolerance
