import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tauhusimi.errors import NumericalContractError, ValidationError
from tauhusimi.grids import Axis, PhaseGrid, QuasiDistribution, fit_gaussian, normalize_density, outside_mass_estimate


def _gauss(grid, mu, var):
    pts = grid.points()
    return np.exp(-0.5 * np.sum((pts - mu) ** 2 / var, axis=1)).reshape(grid.shape)


def test_axis_rejects_bad_ranges():
    with pytest.raises(ValidationError):
        Axis(1.0, 1.0, 5)
    with pytest.raises(ValidationError):
        Axis(0.0, math.inf, 5)


def test_points_are_row_major():
    g = PhaseGrid.uniform(-1, 1, 3, 2)
    pts = g.points()
    assert pts.shape == (9, 2)
    assert pts[:3].tolist() == [[-1, -1], [-1, 0], [-1, 1]]


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(0.3, 2.0))
def test_trapezoid_integrates_gaussian(mu, var):
    g = PhaseGrid.uniform(-12, 12, 241, 1)
    assert g.integrate(_gauss(g, [mu], [var])) == pytest.approx(math.sqrt(2 * math.pi * var), rel=1e-10)


def test_index_of_and_at():
    g = PhaseGrid.uniform(-2, 2, 41, 2)
    d = QuasiDistribution(g, np.arange(g.size, dtype=float), 1.0)
    assert g.index_of([0.3, -2.0]) == (23, 0)
    assert g.index_of([9.0, -9.0]) == (40, 0)
    assert d.at([0.3, -2.0]) == 23 * 41
    with pytest.raises(ValidationError, match="not a grid node"):
        d.at([0.33, 0.0])


def test_outside_mass_overestimates_gaussian_tail():
    g = PhaseGrid.uniform(-3, 3, 121, 1)
    v = _gauss(g, [0.0], [1.0])
    true_out = math.erfc(3 / math.sqrt(2))
    est = outside_mass_estimate(g, v)
    assert true_out <= est < 3 * true_out


def test_normalize_density_clamps_and_rejects():
    g = PhaseGrid.uniform(-6, 6, 121, 1)
    v = _gauss(g, [0.0], [1.0])
    v[0] = -1e-16
    dist = normalize_density(g, v, 1.0)
    assert dist.values.min() == 0.0 and dist.integral() == pytest.approx(1.0)
    v[0] = -1e-6
    with pytest.raises(NumericalContractError, match="negative"):
        normalize_density(g, v, 1.0)
    with pytest.raises(NumericalContractError):
        normalize_density(g, np.zeros(g.shape), 1.0)


def test_coverage_warning():
    g = PhaseGrid.uniform(-1, 1, 41, 1)
    dist = normalize_density(g, _gauss(g, [0.0], [1.0]), 1.0)
    assert any("grid coverage" in w for w in dist.warnings)


@settings(max_examples=10, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.4, 1.5), st.floats(0.4, 1.5))
def test_fit_gaussian_recovers_parameters(m1, m2, v1, v2):
    g = PhaseGrid.uniform(-7, 7, 71, 2)
    dist = QuasiDistribution(g, 0.3 * _gauss(g, [m1, m2], [v1, v2]), 1.0)
    mu, var = fit_gaussian(dist)
    np.testing.assert_allclose(mu, [m1, m2], atol=1e-8)
    np.testing.assert_allclose(var, [v1, v2], rtol=1e-8)
