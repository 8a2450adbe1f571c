"""Tests for the KDE, the augmented estimator and the normalization check."""

import numpy as np
import pytest

from conformal_density.density import (
    Dataset,
    augmented_eval,
    kde_eval,
    kde_normalization_check,
    kernel_sums,
    make_estimate,
    support_bounds,
)
from conformal_density.errors import CoverageWarning, GridCoverageError, InvalidInputError
from conformal_density.geometry import Grid, default_grid
from tests.conftest import brute_force_kde, epanechnikov_1d


class TestDataset:
    """Test sample validation."""

    def test_one_dimensional_input_becomes_column(self):
        """A flat array is n points in R^1."""
        ds = Dataset(np.array([1.0, 2.0, 3.0]))
        assert (ds.n, ds.d) == (3, 1)

    def test_points_are_read_only(self):
        """Stored points cannot be mutated in place."""
        ds = Dataset(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            ds.points[0, 0] = 1.0

    def test_rejects_non_finite(self):
        """A NaN anywhere is invalid input naming the point."""
        with pytest.raises(InvalidInputError, match="point 1"):
            Dataset(np.array([[0.0], [np.nan]]))

    def test_rejects_empty(self):
        """n >= 1."""
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((0, 2)))

    def test_augmented_appends_last(self):
        """aug(Y, y) keeps data order and puts y last."""
        ds = Dataset(np.array([[0.0, 1.0], [2.0, 3.0]]))
        aug = ds.augmented([5.0, 6.0])
        assert aug.n == 3
        assert aug.points[-1].tolist() == [5.0, 6.0]
        assert np.array_equal(aug.points[:2], ds.points)


class TestKdeEval:
    """Test the kernel density estimator."""

    def test_single_point_at_center(self):
        """n=1, h=1: p(0) = K(0)."""
        est = make_estimate([[0.0]], 1.0)
        assert kde_eval(est, [0.0]) == 0.75

    def test_single_point_outside_support(self):
        """n=1, h=1: p(2) = 0."""
        est = make_estimate([[0.0]], 1.0)
        assert kde_eval(est, [2.0]) == 0.0

    def test_matches_double_loop(self, rng):
        """Vectorized evaluation equals an independent double loop to 1e-12."""
        pts = rng.standard_normal((50, 2))
        queries = rng.standard_normal((20, 2))
        est = make_estimate(pts, 0.7)
        expected = brute_force_kde(pts, 0.7, queries, epanechnikov_1d)
        assert np.allclose(est.evaluate(queries), expected, rtol=0.0, atol=1e-12)

    def test_permutation_invariance(self, rng):
        """Reordering the data changes the estimate only by rounding."""
        pts = rng.standard_normal((40, 2))
        queries = rng.standard_normal((30, 2))
        a = make_estimate(pts, 0.5).evaluate(queries)
        b = make_estimate(pts[rng.permutation(40)], 0.5).evaluate(queries)
        assert np.allclose(a, b, rtol=0.0, atol=1e-10)

    def test_zero_far_from_data(self, sample_2d):
        """Compact support: nothing beyond h * sqrt(d) of every point."""
        est = make_estimate(sample_2d, 0.3)
        far = sample_2d.points.max(axis=0) + 1.0
        assert kde_eval(est, far) == 0.0

    def test_dimension_mismatch(self, sample_2d):
        """A 3-d query against 2-d data is invalid input."""
        est = make_estimate(sample_2d, 0.5)
        with pytest.raises(InvalidInputError):
            kde_eval(est, [0.0, 0.0, 0.0])

    def test_one_dimensional_model_rejects_longer_point(self):
        """Two coordinates against 1-d data are not read as two points."""
        est = make_estimate([[0.0], [1.0]], 1.0)
        with pytest.raises(InvalidInputError):
            kde_eval(est, [0.0, 5.0])
        with pytest.raises(InvalidInputError):
            augmented_eval(est, [0.0], [0.0, 5.0])
        with pytest.raises(InvalidInputError):
            augmented_eval(est, [0.0, 5.0], [0.0])
        with pytest.raises(InvalidInputError):
            est.data.augmented([0.0, 5.0])

    def test_one_dimensional_model_accepts_scalar_and_row(self):
        """A scalar, a length-1 list and a (1, 1) array name the same point."""
        est = make_estimate([[0.0], [1.0]], 1.0)
        assert kde_eval(est, 0.25) == kde_eval(est, [0.25]) == kde_eval(est, [[0.25]])

    @pytest.mark.parametrize("h", [0.0, -1.0, float("inf")])
    def test_bad_bandwidth(self, sample_2d, h):
        """h must be finite and positive."""
        with pytest.raises(InvalidInputError):
            make_estimate(sample_2d, h)

    def test_sums_accumulate_in_data_order(self, rng):
        """kernel_sums adds one data point at a time, left to right."""
        pts = rng.standard_normal((6, 1))
        q = rng.standard_normal((4, 1))
        k = make_estimate(pts, 0.8).kernel
        expected = np.zeros(4)
        for p in pts:
            expected = expected + k.evaluate((q - p) / 0.8)
        assert np.array_equal(kernel_sums(pts, 0.8, k, q), expected)


class TestAugmentedEval:
    """Test p_n^y."""

    def test_hand_evaluation(self):
        """n=1, data={0}, y=2, u=0: (1/2)(0.75) + (1/2) K(-2) = 0.375."""
        est = make_estimate([[0.0]], 1.0)
        assert augmented_eval(est, [2.0], [0.0]) == 0.375

    def test_self_term_only(self, sample_2d):
        """Far from the data only K(0) / ((n+1) h^d) survives."""
        h = 0.4
        est = make_estimate(sample_2d, h)
        y = sample_2d.points.max(axis=0) + 5.0
        expected = est.kernel.peak / ((sample_2d.n + 1) * h**2)
        assert augmented_eval(est, y, y) == pytest.approx(expected, rel=1e-15)

    def test_identity_is_exact(self, rng):
        """augmented == (n/(n+1)) p_n + K/((n+1) h^d), bit for bit."""
        pts = rng.standard_normal((30, 2))
        est = make_estimate(pts, 0.6)
        n = est.n
        for _ in range(20):
            y = rng.standard_normal(2)
            u = rng.standard_normal(2)
            self_term = est.kernel.evaluate(((u - y) / 0.6)[np.newaxis])[0]
            expected = (n / (n + 1)) * kde_eval(est, u) + self_term / ((n + 1) * est.h_pow_d)
            assert augmented_eval(est, y, u) == expected

    def test_matches_augmented_dataset(self, rng):
        """Equals the KDE of aug(Y, y) to 1e-12."""
        pts = rng.standard_normal((25, 2))
        est = make_estimate(pts, 0.5)
        y = rng.standard_normal(2)
        u = rng.standard_normal((10, 2))
        direct = make_estimate(est.data.augmented(y), 0.5).evaluate(u)
        assert np.allclose(est.augmented_evaluate(y, u), direct, rtol=0.0, atol=1e-12)


class TestNormalizationCheck:
    """Test the quadrature diagnostic."""

    def test_covering_grid_integrates_to_one(self, rng):
        """A fine covering grid gives 1 within 1e-3."""
        est = make_estimate(rng.standard_normal((30, 1)), 0.5)
        grid = default_grid(est.data.points, 0.5, 2000)
        assert kde_normalization_check(est, grid) == pytest.approx(1.0, abs=1e-3)

    def test_two_dimensional_default_resolution(self, rng):
        """n=200 2-d sample at the default grid: 1 within 1e-3."""
        est = make_estimate(rng.standard_normal((200, 2)), 0.5)
        grid = default_grid(est.data.points, 0.5)
        assert kde_normalization_check(est, grid) == pytest.approx(1.0, abs=1e-3)

    def test_truncating_grid_raises(self, rng):
        """Strict mode refuses a grid that misses part of the support."""
        est = make_estimate(rng.standard_normal((30, 1)), 0.5)
        with pytest.raises(GridCoverageError):
            kde_normalization_check(est, Grid((0.0,), (1.0,), (100,)))

    def test_truncating_grid_warns(self, rng):
        """Lenient mode warns and returns a value below 1."""
        est = make_estimate(rng.standard_normal((30, 1)), 0.5)
        with pytest.warns(CoverageWarning):
            value = kde_normalization_check(est, Grid((0.0,), (1.0,), (100,)), strict=False)
        assert value < 1.0

    def test_support_bounds(self):
        """Data range expanded by h."""
        est = make_estimate([[0.0, 1.0], [2.0, -1.0]], 0.5)
        lo, hi = support_bounds(est)
        assert lo.tolist() == [-0.5, -1.5]
        assert hi.tolist() == [2.5, 1.5]
