"""Shared fixtures and utilities for all tests."""

from pathlib import Path

import numpy as np
import pytest

from conformal_density.density import Dataset

_project_root = Path(__file__).parent.parent


@pytest.fixture
def project_root():
    """Return project root path."""
    return _project_root


@pytest.fixture
def rng():
    """A seeded generator, fresh for each test."""
    return np.random.default_rng(20140731)


@pytest.fixture
def sample_2d(rng):
    """Twenty points from a standard 2-d normal."""
    return Dataset(rng.standard_normal((20, 2)))


@pytest.fixture
def bimodal_1d():
    """Twenty points from two well separated clusters on the line."""
    r = np.random.default_rng(7)
    pts = np.concatenate([r.normal(-2.0, 0.5, 10), r.normal(2.0, 0.5, 10)])
    return Dataset(pts.reshape(-1, 1))


def write_points(path: Path, points, header: str | None = None) -> Path:
    """Write points as CSV rows with 17 significant digits."""
    arr = np.atleast_2d(np.asarray(points, dtype=np.float64))
    lines = [header] if header else []
    lines += [",".join(format(x, ".17g") for x in row) for row in arr]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


@pytest.fixture
def data_csv(tmp_path, bimodal_1d):
    """The bimodal sample as a headerless CSV file."""
    return write_points(tmp_path / "data.csv", bimodal_1d.points)


def brute_force_kde(points, h, queries, k1):
    """Double-loop KDE with a univariate kernel ``k1`` in product form."""
    pts = np.atleast_2d(points)
    qs = np.atleast_2d(queries)
    n, d = pts.shape
    out = []
    for q in qs:
        total = 0.0
        for p in pts:
            term = 1.0
            for j in range(d):
                term *= k1((q[j] - p[j]) / h)
            total += term
        out.append(total / (n * h**d))
    return np.array(out)


def epanechnikov_1d(u: float) -> float:
    return 0.75 * (1.0 - u * u) if abs(u) <= 1.0 else 0.0
