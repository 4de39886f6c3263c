"""Acceptance checks, one per criterion, at the stated tolerances.

Each test records a PASS/FAIL line through the ``criterion`` fixture; the
lines are printed in the terminal summary.
"""
import math

import numpy as np
import pytest

from tauhusimi import husimi, models, spin, weak, wigner
from tauhusimi.grids import PhaseGrid, fit_gaussian

pytestmark = pytest.mark.acceptance

CFG48 = models.HilbertConfig(48)


def test_c1_convolution_identity(criterion):
    grid = PhaseGrid.uniform(-6, 6, 257, 2)
    obs = models.canonical_pair(CFG48.working())
    taus = [0.25, 1.0, 4.0]
    specs = ["fock:0", "fock:1", "fock:2", "coherent:re=1.0,im=0.0", "cat:re=1.5", "thermal:0.5"]
    worst, where = 0.0, None
    for spec in specs:
        rho = models.make_state(spec, CFG48)
        w = wigner.wigner_grid(rho, grid)
        hs = husimi.husimi_grids([rho], obs, grid, taus)[0]
        for tau, h in zip(taus, hs):
            err = float(np.max(np.abs(h.values - wigner.smear(w, wigner.SmearingKernelCV(tau)).values)))
            if err > worst:
                worst, where = err, (spec, tau)
    assert criterion("C1", worst < 1e-5, f"sup|H - W*g| = {worst:.2e} (worst {where}), need < 1e-5")


def test_c2_kernel_variance(criterion):
    exact = all(wigner.SmearingKernelCV(t, hb).variance == hb / (2 * math.tanh(hb * t))
                for t in (0.1, 1.0, 7.0) for hb in (0.5, 1.0, 2.0))
    grid = PhaseGrid.uniform(-7, 7, 141, 2)
    h = husimi.husimi_grid(models.make_state("fock:0", CFG48), models.canonical_pair(CFG48.working()), grid, 1.0)
    _, var = fit_gaussian(h)
    dev = float(np.max(np.abs(var - (0.5 + 0.65685))))
    ok = exact and dev < 1e-3
    assert criterion("C2", ok, f"kernel law exact={exact}; fitted variance {var[0]:.6f},{var[1]:.6f}, |dev| {dev:.1e} < 1e-3")


def test_c3_spin_closed_form(criterion):
    rng = np.random.default_rng(2024)
    ev = husimi.SemigroupEvaluator(models.pauli_set("xyz"), route="dense")
    worst = 0.0
    for _ in range(1000):
        rho = models.random_qubit(int(rng.integers(2**31)))
        r = rng.uniform(-2, 2, size=3)
        tau = float(rng.uniform(0.1, 5.0))
        op = ev.numerators([rho], r[None, :], [tau])[0, 0, 0]
        closed = spin.spin_numerator(models.bloch_vector(rho), r, tau)
        worst = max(worst, abs(op - closed))
    xg, wg = np.polynomial.legendre.leggauss(120)
    pts = np.stack(np.meshgrid(8 * xg, 8 * xg, 8 * xg, indexing="ij"), -1)
    wt = np.einsum("i,j,k->ijk", 8 * wg, 8 * wg, 8 * wg)
    rel = 0.0
    for tau in (0.5, 1.0, 2.0):
        want = (math.pi / tau) ** 1.5 * (2 * tau + 1) * math.exp(tau)
        got = float(np.sum(spin.spin_numerator([0.3, -0.2, 0.5], pts, tau, drop=3) * wt))
        rel = max(rel, abs(got - want) / want)
    ok = worst < 1e-12 and rel < 1e-4
    assert criterion("C3", ok, f"probe diff {worst:.1e} < 1e-12; normalization rel err {rel:.1e} < 1e-4")


def test_c4_shell_limit(criterion):
    rep = spin.shell_limit([0, 0, 1], [100.0], 0.3)
    mass = float(rep.shell_mass[0])
    up = float(rep.center_density[0, rep.bin_index([0, 0, 1])])
    anti = float(rep.center_density[0, rep.bin_index([0, 0, -1])])
    parts = [mass >= 1 - 1e-6, abs(up - 1 / (2 * math.pi)) < 1e-3, anti <= 1e-6]
    detail = (f"shell mass 1-{1 - mass:.1e} (need 1-1e-6) {'ok' if parts[0] else 'short'}; "
              f"+z {up:.6f} vs {1 / (2 * math.pi):.6f}; antipodal {anti:.1e}")
    assert criterion("C4", all(parts), detail)


def test_c5_trotter_convergence(criterion):
    obs = models.canonical_pair(CFG48.working())
    rho = models.make_state("fock:0", CFG48)
    grid = PhaseGrid.uniform(-6, 6, 121, 2)
    probes = [(0, 0), (1, 0), (0, 1), (1, 1)]
    tau = 1.0
    h = husimi.husimi_grid(rho, obs, grid, tau)
    ref = husimi.SemigroupEvaluator(obs).numerators([rho], np.array(probes, float), [tau])[:, 0, 0] / h.normalization
    ns = [4, 8, 16, 32, 64]
    errs = []
    for n in ns:
        vals = weak.conditional_constant_grid(rho, obs, n, tau, grid)
        got = np.array([weak.conditional_constant_density(rho, obs, p, n, tau, grid, values=vals) for p in probes])
        errs.append(float(np.max(np.abs(got - ref))))
    slope = float(np.polyfit(np.log(ns), np.log(errs), 1)[0])
    ok = abs(slope + 1) <= 0.3 and errs[-1] < 1e-4
    assert criterion("C5", ok, f"slope {slope:.3f} (need -1+-0.3); error at n=64 {errs[-1]:.2e} (need < 1e-4)")


def test_c6_born_limit(criterion):
    sz = models.observables_from_labels(["Sz"])
    a = weak.born_limit(models.make_state("diag:0.3,0.7"), sz, [50.0], 0.5)
    want_a = np.array([0.7, 0.3]) if a.eigenvalues[0] < 0 else np.array([0.3, 0.7])
    err_a = float(np.max(np.abs(a.masses[0] - want_a)))
    cfg = models.HilbertConfig(16)
    nop = models.number_operator(cfg)
    nbar = 0.5
    rho = models.make_state(f"thermal:{nbar}", cfg, max_tail=1e-7)
    b = weak.born_limit(rho, nop, [50.0], 0.49)
    k = np.arange(b.eigenvalues.size)
    boltz = nbar**k / (1 + nbar) ** (k + 1)
    err_b = float(np.max(np.abs(b.masses[0] - boltz)))
    ok = err_a <= 1e-6 and err_b <= 1e-6
    assert criterion("C6", ok, f"Sz masses err {err_a:.1e}; thermal vs Boltzmann err {err_b:.1e} (need <= 1e-6)")


def test_c7_positivity_sweep(criterion):
    rng = np.random.default_rng(7)
    taus = [0.05, 0.3, 1.0, 4.0, 20.0]
    cfg = models.HilbertConfig(16)
    pair = models.canonical_pair(cfg.working())
    paulis = models.pauli_set("xyz")
    g2 = PhaseGrid.uniform(-6, 6, 41, 2)
    g3 = PhaseGrid.uniform(-3, 3, 17, 3)
    worst, count = 0.0, 0
    for i in range(200):
        seed = int(rng.integers(2**31))
        rank = int(rng.integers(1, 4))
        if i % 2:
            rho, obs, grid = models.random_qubit(seed, rank=min(rank, 2)), paulis, g3
        else:
            rho, obs, grid = models.make_state(f"random:seed={seed},rank={rank}", cfg), pair, g2
        tau = taus[i % len(taus)]
        num = husimi.numerator_grid(rho, obs, grid, tau)
        low = float(np.min(num / grid.integrate(num)))
        worst = min(worst, low)
        count += low < -1e-14
    assert criterion("C7", count == 0, f"{count} of 200 states below -1e-14; lowest value {worst:.1e}")


def test_c8_coherent_limit(criterion):
    grid = PhaseGrid.uniform(-7, 7, 141, 2)
    obs = models.canonical_pair(CFG48.working())
    worst = 0.0
    for spec in ("fock:0", "coherent:re=1.0,im=0.0"):
        rho = models.make_state(spec, CFG48)
        h = husimi.husimi_grid(rho, obs, grid, 20.0)
        worst = max(worst, float(np.max(np.abs(h.values - husimi.coherent_reference(rho, grid)))))
    assert criterion("C8", worst < 1e-6, f"sup|H_20 - Q| = {worst:.1e} (need < 1e-6)")


def test_c9_outcome_sampler(criterion):
    sz = models.observables_from_labels(["Sz"])
    rho = models.make_state("diag:0.5,0.5")
    draws = np.sort(weak.sample_outcomes(rho, sz, 0, 1.0, 100_000, seed=12345))
    again = np.sort(weak.sample_outcomes(rho, sz, 0, 1.0, 100_000, seed=12345))
    cdf = weak.outcome_cdf(rho, sz, 0, 1.0, draws)
    n = draws.size
    ks = float(max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n)))
    ok = ks < 0.01 and np.array_equal(draws, again)
    assert criterion("C9", ok, f"CDF sup-distance {ks:.4f} (need < 0.01); deterministic={np.array_equal(draws, again)}")
