import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tauhusimi import husimi, models, spin
from tauhusimi.errors import NumericalContractError, ValidationError
from tauhusimi.grids import PhaseGrid

from oracles import spin_trace

unit_ball = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) <= 1)
points = st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))


def test_numerator_examples():
    for tau in (0.5, 1.0, 3.0):
        assert spin.spin_numerator([0, 0, 0], [0, 0, 0], tau) == pytest.approx(math.exp(-3 * tau), rel=1e-14)
    up = [0, 0, 1]
    assert spin.spin_numerator(up, up, 1.0, drop=2) == pytest.approx(1.0, rel=1e-14)
    assert spin.spin_numerator(up, [0, 0, -1], 1.0, drop=2) == pytest.approx(math.exp(-4), rel=1e-14)
    assert spin.spin_numerator_bloch(up, up, 1.0) == pytest.approx(1.0, rel=1e-14)
    assert spin.spin_numerator_bloch(up, [0, 0, -1], 1.0) == pytest.approx(math.exp(-4), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(unit_ball, points, st.floats(0.1, 20))
def test_numerator_matches_matrix_oracle(r_rho, r, tau):
    want = spin_trace(r_rho, r, tau)
    got = spin.spin_numerator(r_rho, r, tau)
    assert abs(got - want) <= 1e-12 * max(1.0, want) + 1e-300


@settings(max_examples=100, deadline=None)
@given(unit_ball, points, st.floats(0.05, 10))
def test_two_forms_agree(r_rho, r, tau):
    if 2 * tau * np.linalg.norm(r) > 700:
        return
    a = spin.spin_husimi(r_rho, r, tau)
    b = spin.spin_husimi(r_rho, r, tau, form="bloch")
    assert abs(a - b) <= 1e-12 * max(a, 1e-300) + 1e-300


def test_series_branch_near_origin():
    r_rho = np.array([0.3, -0.4, 0.5])
    tau = 2.0
    for rad in (1e-7, 5e-7, 2e-6):
        r = rad * np.array([0.6, 0.0, 0.8])
        want = spin_trace(r_rho, r, tau) * math.exp(2 * tau)
        assert spin.spin_numerator_bloch(r_rho, r, tau) == pytest.approx(want, rel=1e-12)


def test_bloch_form_guards_overflow():
    with pytest.raises(NumericalContractError, match="700"):
        spin.spin_numerator_bloch([0, 0, 0], [0, 0, 4], 100.0)
    # the regrouped form stays finite there
    assert np.isfinite(spin.spin_numerator([0, 0, 0], [0, 0, 4], 100.0))


def test_husimi_origin_value():
    assert spin.spin_husimi([0, 0, 0], [0, 0, 0], 1.0) == pytest.approx(math.exp(-1) / (3 * math.pi**1.5), rel=1e-13)


def test_antipodal_suppression():
    up = [0, 0, 1]
    for tau in (10.0, 50.0, 200.0):
        peak = spin.spin_husimi(up, up, tau)
        anti = spin.spin_husimi(up, [0, 0, -1], tau)
        assert anti / peak < 2 * math.exp(-4 * tau) + 1e-300


def test_rejects_non_state():
    with pytest.raises(ValidationError, match="exceeds 1"):
        spin.spin_husimi([0, 0, 1.1], [0, 0, 0], 1.0)
    with pytest.raises(ValidationError):
        spin.spin_husimi([0, 0, 0], [0, 0, 0], 1.0, form="icosahedral")
    with pytest.raises(ValidationError):
        spin.spin_numerator([0, 0, 0], [0, 0], 1.0)


@settings(max_examples=100, deadline=None)
@given(unit_ball, points, st.floats(0.01, 100))
def test_positivity(r_rho, r, tau):
    assert spin.spin_husimi(r_rho, r, tau) >= 0


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_matches_generic_grid(seed):
    rho = models.random_qubit(seed)
    r_rho = models.bloch_vector(rho)
    grid = PhaseGrid.uniform(-2, 2, 21, 3)
    tau = 1.0
    z = spin.spin_normalization(tau)
    gen = husimi.husimi_grid(rho, models.pauli_set("xyz"), grid, tau, normalization=z)
    closed = spin.spin_husimi(r_rho, grid.points(), tau).reshape(grid.shape)
    np.testing.assert_allclose(gen.values, closed, atol=1e-8)


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
def test_normalization_by_quadrature(tau):
    xg, wg = np.polynomial.legendre.leggauss(120)
    x = 8 * xg
    w = 8 * wg
    pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1)
    wt = np.einsum("i,j,k->ijk", w, w, w)
    for r_rho in ([0, 0, 0], [0.6, 0.0, -0.8]):
        val = float(np.sum(spin.spin_numerator(r_rho, pts, tau, drop=3) * wt))
        assert val == pytest.approx((math.pi / tau) ** 1.5 * (2 * tau + 1) * math.exp(tau), rel=1e-4)
    assert spin.spin_normalization(tau, drop=3) == pytest.approx((math.pi / tau) ** 1.5 * (2 * tau + 1) * math.exp(tau))


def test_kernel_examples():
    assert spin.spin_kernel(1.0, [1, 0, 0], [1, 0, 0]) == pytest.approx(math.pi**-1.5 / 3, rel=1e-14)
    assert spin.spin_kernel(1.0, [1, 0, 0], [1, 0, 0]) == pytest.approx(0.0599, abs=1e-4)
    base = (2 / math.pi) ** 1.5 * math.exp(-2) / 5
    for rp in ([0, 0, 0], [1, 2, 3], [-5, 0, 0.1]):
        assert spin.spin_kernel(2.0, [0, 0, 0], rp) == pytest.approx(base, rel=1e-14)


def test_kernel_is_log_linear_and_guarded():
    r = np.array([0.2, -0.1, 0.4])
    d = np.array([0.3, 0.5, -0.2])
    ts = np.linspace(0, 2, 5)
    vals = np.log([spin.spin_kernel(1.5, r, t * d) for t in ts])
    assert np.max(np.abs(np.diff(vals, 2))) < 1e-12
    with pytest.raises(NumericalContractError, match="700"):
        spin.spin_kernel(100.0, [2, 0, 0], [2, 0, 0])


def test_equal_area_bins():
    bins = spin.equal_area_bins(80)
    assert len(bins) == 80
    area = np.array([b.solid_angle for b in bins])
    np.testing.assert_allclose(area, 4 * math.pi / 80, rtol=1e-12)
    assert area.sum() == pytest.approx(4 * math.pi)
    np.testing.assert_allclose(bins[0].center, [0, 0, 1])
    np.testing.assert_allclose(bins[-1].center, [0, 0, -1])
    # cells are not degenerate slivers
    for b in bins[1:-1]:
        height = math.acos(b.z_lo) - math.acos(b.z_hi)
        width = (b.phi_hi - b.phi_lo) * math.sqrt(1 - (0.5 * (b.z_lo + b.z_hi)) ** 2)
        assert 0.4 < height / width < 2.5


@pytest.mark.parametrize("n", [2, 12, 33, 80, 200])
def test_equal_area_bins_counts(n):
    bins = spin.equal_area_bins(n)
    assert len(bins) == n
    np.testing.assert_allclose([b.solid_angle for b in bins], 4 * math.pi / n, rtol=1e-12)


@pytest.fixture(scope="module")
def shell_up():
    return spin.shell_limit([0, 0, 1], [10.0, 30.0, 100.0], 0.3)


def test_shell_mass_increases(shell_up):
    off = shell_up.off_shell_mass
    assert all(b < a for a, b in zip(off, off[1:]))
    tau = np.array(shell_up.taus)
    # radial Gaussian tail estimate at the shell edges
    assert np.all(off < 5 * np.exp(-tau * 0.09) + 3e-5)


def test_shell_directional_density(shell_up):
    k = shell_up.bin_index([0, 0, 1])
    assert shell_up.center_density[-1, k] == pytest.approx(1 / (2 * math.pi), abs=1e-3)
    anti = shell_up.bin_index([0, 0, -1])
    assert shell_up.center_density[-1, anti] <= 1e-6
    # mean density per bin follows (1 + n.r_rho)/(4 pi)
    err = np.abs(shell_up.mean_density[-1] - shell_up.expected)
    assert err.max() < 0.01


def test_shell_isotropic():
    rep = spin.shell_limit([0, 0, 0], [50.0], 0.3)
    np.testing.assert_allclose(rep.center_density[0], rep.center_density[0].mean(), rtol=1e-10)
    np.testing.assert_allclose(rep.mean_density[0], rep.mean_density[0].mean(), rtol=1e-6)
    assert rep.center_density[0].mean() == pytest.approx(1 / (4 * math.pi), abs=1e-3)


def test_shell_argument_checks():
    with pytest.raises(ValidationError):
        spin.shell_limit([0, 0, 1], [1.0], 0.6)
    with pytest.raises(ValidationError):
        spin.shell_limit([0, 0, 1], [2.0, 1.0], 0.3)
