"""Characteristic functions, grid Wigner functions and Gaussian smearing.

Fourier convention: ``W(a) = (2 pi)^-n \\int chi(xi) exp(-i xi.a) dxi`` with
``chi(xi) = tr(rho exp(i xi.A))``, so that ``\\int W = chi(0) = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from . import _spectral
from .errors import NumericalContractError, ValidationError
from .grids import PhaseGrid, QuasiDistribution
from .husimi import _check_tau, semigroup_at
from .linalg import bandwidth
from .models import DensityMatrix, HilbertConfig, ObservableSet, canonical_pair

IMAG_TOL = 1e-6
KERNEL_SIGMAS = 6.0
# extra levels used for Wigner work beyond the state's dimension
WIGNER_PAD = 64
CHI_EDGE_TOL = 1e-10


@dataclass
class CharacteristicGrid:
    xi_grid: PhaseGrid
    values: np.ndarray
    labels: tuple = ()

    def at_origin(self) -> complex:
        return complex(self.values[self.xi_grid.index_of(np.zeros(self.xi_grid.ndim))])

    def hermitian_defect(self) -> float:
        """``max |chi(-xi) - conj(chi(xi))|`` (meaningful for grids symmetric about 0)."""
        flipped = self.values[tuple(slice(None, None, -1) for _ in range(self.values.ndim))]
        return float(np.max(np.abs(flipped - self.values.conj())))


@dataclass(frozen=True)
class SmearingKernelCV:
    """Gaussian symbol of the semigroup for the canonical pair.

    ``variance = hbar / (2 tanh(hbar tau))`` and ``prefactor = 1/cosh(hbar tau)``.
    """

    tau: float
    hbar: float = 1.0
    variance: float = field(init=False)
    prefactor: float = field(init=False)

    def __post_init__(self):
        tau = _check_tau(self.tau)
        if not self.hbar > 0:
            raise ValidationError("hbar must be > 0")
        ht = self.hbar * tau
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "variance", self.hbar / (2.0 * math.tanh(ht)))
        object.__setattr__(self, "prefactor", 1.0 / math.cosh(ht))

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    def symbol(self, delta) -> np.ndarray:
        """``prefactor * exp(-|delta|^2 / (2 variance))``; *delta* has shape ``(..., 2)``."""
        d2 = np.sum(np.asarray(delta, dtype=float) ** 2, axis=-1)
        return self.prefactor * np.exp(-d2 / (2.0 * self.variance))

    def density(self, delta) -> np.ndarray:
        """Unit-mass isotropic Gaussian ``g_sigma(delta)`` in two dimensions."""
        d2 = np.sum(np.asarray(delta, dtype=float) ** 2, axis=-1)
        return np.exp(-d2 / (2.0 * self.variance)) / (2.0 * math.pi * self.variance)


def _linear_traces(obs: ObservableSet, rho: DensityMatrix, points, threads=None):
    """``tr(rho exp(i sum_k xi_k A_k))`` for each row of *points*."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != obs.n:
        raise ValidationError(f"xi points need {obs.n} coordinates")
    if not np.all(np.isfinite(points)):
        raise ValidationError("xi points must be finite")
    factor, group = _spectral.stack_factors([rho], obs.dim)
    mats = np.stack(obs.observables)
    if obs.dim >= 2 and max(bandwidth(m) for m in mats) <= 1:
        diag = points @ np.stack([np.diag(m).real for m in mats])
        off = points @ np.stack([np.diag(m, 1) for m in mats])
        out = _spectral.tridiagonal_traces(diag, off, factor, group, 1, [1j], threads=threads)
    else:

        def build(lo, hi):
            return np.tensordot(points[lo:hi], mats, axes=(1, 0))

        out = _spectral.dense_traces(build, points.shape[0], factor, group, 1, [1j], threads)
    return out[:, 0, 0]


def characteristic_function(rho, obs: ObservableSet, xi_grid: PhaseGrid, threads=None) -> CharacteristicGrid:
    """Generalized characteristic function on *xi_grid*.

    Args:
        rho: state (``DensityMatrix`` or array) with dim at most ``obs.dim``.
        obs: observables, one per grid axis.
        xi_grid: grid over xi, expected symmetric about 0.

    Returns:
        CharacteristicGrid with complex values in grid shape.
    """
    if xi_grid.ndim != obs.n:
        raise ValidationError(f"xi grid has {xi_grid.ndim} axes for {obs.n} observables")
    for ax in xi_grid.axes:
        if abs(ax.lo + ax.hi) > 1e-12 * max(1.0, abs(ax.hi)):
            raise ValidationError("xi grid must be symmetric about 0")
    rho = rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)
    vals = _linear_traces(obs, rho, xi_grid.points(), threads)
    if not np.all(np.isfinite(vals)):
        raise NumericalContractError("non-finite characteristic function value")
    return CharacteristicGrid(xi_grid, vals.reshape(xi_grid.shape), obs.labels)


def _work_pair(rho: DensityMatrix, obs, hbar, work_dim):
    if obs is not None:
        if not obs.is_canonical_pair():
            raise ValidationError("wigner_grid supports the canonical pair (X, P) only")
        hbar = obs.hbar if hbar is None else hbar
    hbar = rho.hbar if hbar is None else hbar
    if work_dim is None:
        work_dim = max(rho.dim + WIGNER_PAD, obs.dim if obs is not None else 0)
    if work_dim < rho.dim:
        raise ValidationError("work_dim is smaller than the state dimension")
    return canonical_pair(HilbertConfig(work_dim, hbar, 0)), hbar


def trusted_radius(rho: DensityMatrix, pair: ObservableSet, r_max: float, n_rays=12, n_radii=64, tol=1e-12):
    """Radius within which truncated ``tr(rho exp(i xi.A))`` is converged in the dimension.

    The truncated exponential behaves like a finite Gauss-Hermite rule and
    aliases at large ``|xi|``; the safe radius depends on both the working
    dimension and the state.  Rays are probed against a run with 32 more
    levels.

    Returns:
        ``(radius, chi_edge)``: the trusted radius and ``max |chi|`` over the
        probed rays at that radius (what the cutoff discards).
    """
    big = canonical_pair(HilbertConfig(pair.dim + 32, pair.hbar, 0))
    r = np.linspace(0.0, r_max, n_radii)
    ang = np.pi * np.arange(n_rays) / n_rays  # chi(-xi) = conj(chi(xi)) covers the rest
    pts = (r[None, :, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)[:, None, :]).reshape(-1, 2)
    lo = _linear_traces(pair, rho, pts).reshape(n_rays, n_radii)
    hi = _linear_traces(big, rho, pts).reshape(n_rays, n_radii)
    bad = np.abs(lo - hi) > tol
    first = np.where(bad.any(axis=1), bad.argmax(axis=1), n_radii)
    k = int(first.min())
    radius = float(r[k - 1]) if k > 0 else 0.0
    edge = float(np.max(np.abs(hi[:, max(k - 1, 0)]))) if k < n_radii else 0.0
    return radius, edge


def wigner_grid(rho, grid: PhaseGrid, obs=None, hbar=None, work_dim=None, threads=None) -> QuasiDistribution:
    """Wigner function of an oscillator state on a uniform ``(x, p)`` grid.

    ``chi`` is sampled on the grid conjugate to *grid* (``dxi = 2 pi / (M da)``),
    zeroed beyond :func:`trusted_radius`, and inverted by FFT.  Operators are
    rebuilt at ``work_dim`` (default ``rho.dim + 64``) because the truncated
    characteristic function is only trustworthy on a disc whose radius grows
    with the dimension.  If ``|chi|`` is not negligible (> 1e-10) at that
    radius a warning is attached.
    """
    rho = rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)
    if grid.ndim != 2:
        raise ValidationError("wigner_grid needs a 2-D (x, p) grid")
    pair, hbar = _work_pair(rho, obs, hbar, work_dim)
    nyquist = min(math.pi / ax.step for ax in grid.axes)
    radius, edge = trusted_radius(rho, pair, nyquist)

    # conjugate grid: xi_k = (k - M//2) * dxi
    xis = []
    for ax in grid.axes:
        m = ax.count
        dxi = 2.0 * math.pi / (m * ax.step)
        xi = (np.arange(m) - m // 2) * dxi
        xis.append(xi)
    kx, kp = np.meshgrid(xis[0], xis[1], indexing="ij")
    inside = kx**2 + kp**2 <= radius**2
    chi = np.zeros(grid.shape, dtype=complex)
    pts = np.stack([kx[inside], kp[inside]], axis=1)
    chi[inside] = _linear_traces(pair, rho, pts, threads)

    # shift the a-origin to a_min, transform, then undo the xi offset
    f = chi * np.exp(-1j * np.add.outer(xis[0] * grid.axes[0].lo, xis[1] * grid.axes[1].lo))
    w = np.fft.fft2(f)
    for k, ax in enumerate(grid.axes):
        m = ax.count
        corr = np.exp(2j * math.pi * (m // 2) * np.arange(m) / m)
        w = w * (corr[:, None] if k == 0 else corr[None, :])
    dxi_area = np.prod([2.0 * math.pi / (ax.count * ax.step) for ax in grid.axes])
    w = w * dxi_area / (2.0 * math.pi) ** 2

    resid = float(np.max(np.abs(w.imag)))
    if resid > IMAG_TOL:
        raise NumericalContractError(f"Wigner imaginary residue {resid:.2e} > {IMAG_TOL:g}; refine or widen the grid")
    dist = QuasiDistribution(grid, w.real, math.inf, hbar, False, ("x", "p"))
    if edge > CHI_EDGE_TOL:
        dist.warnings.append(
            f"characteristic function cut at |xi| = {radius:.3g} where |chi| = {edge:.2e}; raise work_dim"
        )
    return dist


def smear(wigner: QuasiDistribution, kernel: SmearingKernelCV) -> QuasiDistribution:
    """Convolve a gridded Wigner function with the unit-mass Gaussian of variance ``kernel.variance``.

    The kernel is sampled on the grid spacing, truncated at 6 sigma and
    normalized to unit discrete mass; the linear (zero-padded) convolution
    avoids wraparound.  The result is renormalized by its own quadrature.
    """
    grid = wigner.grid
    if grid.ndim != 2:
        raise ValidationError("smear needs a 2-D grid")
    steps = grid.steps
    sigma = kernel.sigma
    if sigma < 2.0 * float(steps.max()):
        raise ValidationError(f"kernel sigma {sigma:.4g} under-resolved: needs >= 2 grid spacings ({steps.max():.4g})")
    axes = []
    for h in steps:
        half = int(math.ceil(KERNEL_SIGMAS * sigma / h))
        axes.append(np.arange(-half, half + 1) * h)
    dx, dp = np.meshgrid(*axes, indexing="ij")
    g = np.exp(-(dx**2 + dp**2) / (2.0 * kernel.variance))
    g /= g.sum()
    out = signal.fftconvolve(wigner.values, g, mode="same")
    z = grid.integrate(out)
    if not z > 0:
        raise NumericalContractError("smeared distribution has non-positive mass")
    return QuasiDistribution(grid, out / z, kernel.tau, kernel.hbar, True, wigner.labels, z)


def default_wigner_grid(rho: DensityMatrix, hbar=None, count=257) -> PhaseGrid:
    """Square grid wide enough for *rho*: half-width ``sqrt(hbar) * (7 + 2 sqrt(<N>))``."""
    hbar = rho.hbar if hbar is None else hbar
    n_mean = float(np.real(np.sum(np.diag(rho.matrix).real * np.arange(rho.dim))))
    half = math.sqrt(hbar) * (7.0 + 2.0 * math.sqrt(max(n_mean, 0.0)))
    return PhaseGrid.uniform(-half, half, count, 2)


@dataclass
class WeylPairing:
    operator_side: float
    phase_space_side: float

    @property
    def residual(self) -> float:
        return abs(self.operator_side - self.phase_space_side)


def weyl_pairing(rho, a, tau, obs=None, hbar=None, grid=None, work_dim=None) -> WeylPairing:
    """Both sides of ``tr(rho G_tau(a)) = \\int W(a') symbol(a' - a) da'``.

    The operator side uses the semigroup at ``obs`` (default: canonical pair at
    ``rho.dim + 8``); the phase-space side integrates the grid Wigner function
    against the Gaussian symbol by trapezoidal quadrature.
    """
    rho = rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)
    tau = _check_tau(tau)
    if obs is None:
        hb = rho.hbar if hbar is None else hbar
        obs = canonical_pair(HilbertConfig(rho.dim + 8, hb, 0))
    if not obs.is_canonical_pair():
        raise ValidationError("the Weyl pairing check is defined for the canonical pair (X, P)")
    hbar = obs.hbar
    a = np.asarray(a, dtype=float).ravel()
    lhs = rho.embed(obs.dim).expectation(semigroup_at(obs, a, tau).operator)
    grid = default_wigner_grid(rho, hbar) if grid is None else grid
    w = wigner_grid(rho, grid, hbar=hbar, work_dim=work_dim)
    kern = SmearingKernelCV(tau, hbar)
    sym = kern.symbol(grid.points() - a).reshape(grid.shape)
    rhs = grid.integrate(w.values * sym)
    return WeylPairing(float(lhs), float(rhs))


def weyl_trace_check(rho, a, tau, obs=None, **kwargs) -> float:
    """Absolute residual of the Weyl trace identity for the Gaussian semigroup."""
    return weyl_pairing(rho, a, tau, obs=obs, **kwargs).residual
