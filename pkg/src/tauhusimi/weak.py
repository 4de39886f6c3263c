"""Gaussian weak measurements: Kraus factors, record densities, Trotter products, sampling, Born limit.

A weak measurement of ``A`` with outcome ``o`` and duration ``t`` acts by the
Kraus factor ``K = (t/pi)^(1/4) exp(-(t/2)(A - o)^2)``; a record of factors
``K_1 .. K_m`` (applied in that order) has density ``tr(K_m..K_1 rho K_1..K_m)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, interpolate, special

from .errors import NumericalContractError, ValidationError
from .grids import PhaseGrid, QuasiDistribution, auto_grid, normalize_density
from .husimi import SemigroupEvaluator, _check_tau, exponent_at
from .linalg import EigenDecomposition, eigh, herm_func
from .models import DensityMatrix, ObservableSet

SAMPLE_POINTS = 4097
SAMPLE_PAD = 6.0
DEGENERATE_TRACE = 1e-300


def _check_duration(duration):
    duration = float(duration)
    if not (duration > 0 and math.isfinite(duration)):
        raise ValidationError(f"duration must be > 0, got {duration}")
    return duration


def _as_state(rho, dim) -> DensityMatrix:
    rho = rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)
    return rho.embed(dim)


class _Spectra:
    """Cached eigendecompositions of the observables of one set."""

    def __init__(self, obs: ObservableSet):
        self.obs = obs
        self._dec = {}

    def __call__(self, k) -> EigenDecomposition:
        if not 0 <= k < self.obs.n:
            raise ValidationError(f"observable index {k} outside 0..{self.obs.n - 1}")
        if k not in self._dec:
            self._dec[k] = eigh(self.obs[k])
        return self._dec[k]


@lru_cache(maxsize=32)
def _spectra(obs):
    return _Spectra(obs)


@dataclass(frozen=True, eq=False)
class KrausFactor:
    index: int
    outcome: float
    duration: float
    operator: np.ndarray


def kraus(obs: ObservableSet, index: int, outcome: float, duration: float) -> KrausFactor:
    """Kraus factor for a weak measurement of ``obs[index]``."""
    duration = _check_duration(duration)
    outcome = float(outcome)
    if not math.isfinite(outcome):
        raise ValidationError("outcome must be finite")
    dec = _spectra(obs)(index)
    amp = (duration / math.pi) ** 0.25
    op = herm_func(obs[index], lambda lam: amp * np.exp(-0.5 * duration * (lam - outcome) ** 2), dec)
    return KrausFactor(int(index), outcome, duration, op)


def resolution_of_identity(obs: ObservableSet, index: int, duration: float, outcomes) -> np.ndarray:
    """Trapezoidal ``\\int K(o)^2 do`` over the 1-D outcome grid *outcomes*."""
    duration = _check_duration(duration)
    o = np.asarray(outcomes, dtype=float)
    dec = _spectra(obs)(index)
    # per eigenvalue: sqrt(t/pi) exp(-t (lam - o)^2)
    vals = math.sqrt(duration / math.pi) * np.exp(-duration * (dec.eigenvalues[:, None] - o[None, :]) ** 2)
    diag = integrate.trapezoid(vals, o, axis=1)
    u = dec.eigenvectors
    return (u * diag) @ u.conj().T


@dataclass(frozen=True)
class MeasurementRecord:
    """Ordered ``(index, outcome, duration)`` triples; the first entry acts first."""

    entries: tuple = ()

    def __post_init__(self):
        rows = []
        for e in self.entries:
            i, o, d = e
            if int(i) != i or i < 0:
                raise ValidationError(f"record index must be a non-negative integer, got {i!r}")
            o = float(o)
            if not math.isfinite(o):
                raise ValidationError("record outcomes must be finite")
            rows.append((int(i), o, _check_duration(d)))
        object.__setattr__(self, "entries", tuple(rows))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def validate(self, obs: ObservableSet):
        for i, _, _ in self.entries:
            if i >= obs.n:
                raise ValidationError(f"record index {i} invalid for {obs.n} observables")

    def reversed(self) -> "MeasurementRecord":
        return MeasurementRecord(self.entries[::-1])

    def to_text(self) -> str:
        return "".join(f"{i} {o!r} {d!r}\n" for i, o, d in self.entries)

    @classmethod
    def from_text(cls, text: str) -> "MeasurementRecord":
        rows = []
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValidationError(f"record line {n}: expected 'index outcome duration', got {line!r}")
            try:
                rows.append((int(parts[0]), float(parts[1]), float(parts[2])))
            except ValueError:
                raise ValidationError(f"record line {n}: cannot parse {line!r}") from None
        return cls(tuple(rows))


def _apply_record(obs, factor, record):
    spec = _spectra(obs)
    b = factor
    for i, o, d in record:
        dec = spec(i)
        amp = (d / math.pi) ** 0.25
        w = amp * np.exp(-0.5 * d * (dec.eigenvalues - o) ** 2)
        u = dec.eigenvectors
        b = u @ (w[:, None] * (u.conj().T @ b))
    return b


def record_density(rho, obs: ObservableSet, record: MeasurementRecord) -> float:
    """``tr(K_m .. K_1 rho K_1 .. K_m)`` for the record's Kraus factors."""
    record = record if isinstance(record, MeasurementRecord) else MeasurementRecord(tuple(record))
    record.validate(obs)
    rho = _as_state(rho, obs.dim)
    b = _apply_record(obs, rho.factor, record)
    val = float(np.sum(np.abs(b) ** 2))
    if not math.isfinite(val):
        raise NumericalContractError("non-finite record density")
    return val


@dataclass(frozen=True, eq=False)
class TrotterProduct:
    n: int
    tau: float
    a: np.ndarray
    operator: np.ndarray
    limit: np.ndarray

    def distance(self) -> float:
        """Spectral-norm distance ``||M_n - exp(-(tau/2) sum_k (A_k - a_k)^2)||``."""
        return float(np.linalg.norm(self.operator - self.limit, 2))


def _half_steps(obs, a, step):
    """``exp(-step (A_k - a_k)^2)`` for each k."""
    spec = _spectra(obs)
    mats = []
    for k, ak in enumerate(a):
        dec = spec(k)
        mats.append(herm_func(obs[k], lambda lam: np.exp(-step * (lam - ak) ** 2), dec))
    return mats


def _check_blocks(n_blocks):
    if int(n_blocks) != n_blocks or n_blocks < 1:
        raise ValidationError(f"n_blocks must be a positive integer, got {n_blocks}")
    return int(n_blocks)


def trotter_operator(obs: ObservableSet, a, tau, n_blocks) -> TrotterProduct:
    """``M_n = (E_1 E_2 .. E_m)^n`` with ``E_k = exp(-(tau/2n)(A_k - a_k)^2)``."""
    tau = _check_tau(tau)
    n = _check_blocks(n_blocks)
    a = np.asarray(a, dtype=float).ravel()
    if a.size != obs.n:
        raise ValidationError(f"outcome vector needs {obs.n} entries")
    block = np.eye(obs.dim, dtype=complex)
    for e in _half_steps(obs, a, tau / (2 * n)):
        block = block @ e
    m_n = np.linalg.matrix_power(block, n)
    limit = herm_func(exponent_at(obs, a), lambda lam: np.exp(-0.5 * tau * lam))
    return TrotterProduct(n, tau, a, m_n, limit)


def conditional_constant_grid(rho, obs: ObservableSet, n_blocks, tau, grid: PhaseGrid) -> np.ndarray:
    """Unnormalized ``tr(M_n^H rho M_n)`` at every grid point (grid-shaped).

    ``tr(M^H rho M) = ||M^H B||_F^2`` with ``rho = B B^H``; ``M^H`` applies
    ``E_1`` first, then ``E_2`` and so on, ``n`` times.  The factors depend on
    one axis each, so they are built per axis value and broadcast.
    """
    tau = _check_tau(tau)
    n = _check_blocks(n_blocks)
    if grid.ndim != obs.n:
        raise ValidationError(f"grid has {grid.ndim} axes but there are {obs.n} observables")
    rho = _as_state(rho, obs.dim)
    b0 = rho.factor
    spec = _spectra(obs)
    step = tau / (2 * n)
    # per axis: stack of E_k(value) matrices, shape (count, d, d)
    e_axes = []
    for k, ax in enumerate(grid.axes):
        dec = spec(k)
        u = dec.eigenvectors
        w = np.exp(-step * (dec.eigenvalues[None, :] - ax.values()[:, None]) ** 2)
        e_axes.append(np.einsum("ij,aj,kj->aik", u, w, u.conj()))
    # v has shape (*grid_prefix, d, r); apply the block n times
    out = np.empty(grid.shape)
    first = e_axes[0]
    rest = e_axes[1:]
    for i0 in range(grid.shape[0]):
        v = np.broadcast_to(b0, (1,) * (grid.ndim - 1) + b0.shape)
        for _ in range(n):
            v = first[i0] @ v
            for k, e in enumerate(rest):
                shape = [1] * (grid.ndim - 1) + list(e.shape[1:])
                shape[k] = e.shape[0]
                v = e.reshape(shape) @ v
        vals = np.sum(np.abs(v) ** 2, axis=(-2, -1))
        out[i0] = np.broadcast_to(vals, grid.shape[1:])
    if not np.all(np.isfinite(out)):
        raise NumericalContractError("non-finite conditional density")
    return out


def conditional_constant_density(rho, obs: ObservableSet, a, n_blocks, tau, grid: PhaseGrid, values=None) -> float:
    """Finite-``n`` conditional density at the constant outcome vector *a*.

    The numerator is ``tr(M_n^H rho M_n)`` at *a*; the normalization is the
    trapezoidal integral of the same numerator over *grid*.  Pass
    *values* (from :func:`conditional_constant_grid`) to reuse a grid.
    """
    if values is None:
        values = conditional_constant_grid(rho, obs, n_blocks, tau, grid)
    z = grid.integrate(values)
    if not z > 0:
        raise NumericalContractError("conditional normalization is not positive")
    a = np.asarray(a, dtype=float).ravel()
    num = conditional_numerator(rho, obs, a, n_blocks, tau)
    return num / z


def conditional_numerator(rho, obs, a, n_blocks, tau) -> float:
    """``tr(M_n(a)^H rho M_n(a))`` at one outcome vector."""
    t = trotter_operator(obs, a, tau, n_blocks)
    rho = _as_state(rho, obs.dim)
    v = t.operator.conj().T @ rho.factor
    return float(np.sum(np.abs(v) ** 2))


def conditional_distribution(rho, obs, n_blocks, tau, grid) -> QuasiDistribution:
    num = conditional_constant_grid(rho, obs, n_blocks, tau, grid)
    return normalize_density(grid, num, tau, obs.hbar, obs.labels)


# ------------------------------------------------------------------ sampling


class _OutcomeSampler:
    """Inverse-CDF sampler for one weak measurement of a single observable.

    The exact density ``sqrt(t/pi) sum_j p_j exp(-t (lam_j - o)^2)`` is
    tabulated on 4097 points spanning the spectrum padded by ``6/sqrt(t)``;
    the cumulative trapezoid is inverted with a monotone cubic (PCHIP).
    """

    def __init__(self, lam, probs, duration):
        pad = SAMPLE_PAD / math.sqrt(duration)
        self.grid = np.linspace(float(lam.min()) - pad, float(lam.max()) + pad, SAMPLE_POINTS)
        dens = math.sqrt(duration / math.pi) * (
            probs[None, :] * np.exp(-duration * (self.grid[:, None] - lam[None, :]) ** 2)
        ).sum(axis=1)
        cdf = integrate.cumulative_trapezoid(dens, self.grid, initial=0.0)
        if not cdf[-1] > 0:
            raise NumericalContractError("outcome density has no mass on the sampling grid")
        cdf /= cdf[-1]
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        self.inverse = interpolate.PchipInterpolator(cdf[keep], self.grid[keep])

    def __call__(self, u):
        return self.inverse(u)


def _step_sampler(obs, rho_factor, index, duration):
    dec = _spectra(obs)(index)
    proj = dec.eigenvectors.conj().T @ rho_factor
    probs = np.sum(np.abs(proj) ** 2, axis=1)
    probs = probs / probs.sum()
    return _OutcomeSampler(dec.eigenvalues, probs, duration)


def sample_outcomes(rho, obs: ObservableSet, index: int, duration: float, size: int, seed=None) -> np.ndarray:
    """*size* independent single-step outcomes for ``obs[index]`` on *rho*."""
    duration = _check_duration(duration)
    rho = _as_state(rho, obs.dim)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sampler = _step_sampler(obs, rho.factor, index, duration)
    return sampler(rng.random(int(size)))


def outcome_cdf(rho, obs: ObservableSet, index: int, duration: float, outcomes) -> np.ndarray:
    """Exact single-step outcome CDF (sum of per-eigenvalue normal CDFs)."""
    duration = _check_duration(duration)
    rho = _as_state(rho, obs.dim)
    dec = _spectra(obs)(index)
    probs = np.sum(np.abs(dec.eigenvectors.conj().T @ rho.factor) ** 2, axis=1)
    o = np.asarray(outcomes, dtype=float)
    z = math.sqrt(2 * duration) * (o[..., None] - dec.eigenvalues)
    return np.sum(probs * special.ndtr(z), axis=-1)


@dataclass
class SampledTrajectory:
    record: MeasurementRecord
    posterior: DensityMatrix
    likelihood: float


def sample_record(rho, obs: ObservableSet, schedule, seed=None) -> SampledTrajectory:
    """Sample a measurement record step by step and return it with the posterior.

    Args:
        rho: initial state.
        obs: observable set indexed by the schedule.
        schedule: sequence of ``(index, duration)`` pairs.
        seed: seed or ``numpy.random.Generator``; fixed seeds are reproducible.

    Returns:
        SampledTrajectory with the record, the normalized posterior state and
        the record density (product of the step probabilities).
    """
    rho = _as_state(rho, obs.dim)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    b = rho.factor
    rows = []
    like = 1.0
    for step, (index, duration) in enumerate(schedule):
        duration = _check_duration(duration)
        index = int(index)
        o = float(_step_sampler(obs, b, index, duration)(rng.random()))
        b = _apply_record(obs, b, [(index, o, duration)])
        tr = float(np.sum(np.abs(b) ** 2))
        if not tr > DEGENERATE_TRACE:
            raise NumericalContractError(f"degenerate posterior at step {step}: trace {tr:.3e}")
        like *= tr
        b = b / math.sqrt(tr)
        rows.append((index, o, duration))
    post = DensityMatrix(b @ b.conj().T, rho.hbar, b)
    return SampledTrajectory(MeasurementRecord(tuple(rows)), post, like)


def posterior(rho, obs: ObservableSet, record: MeasurementRecord) -> DensityMatrix:
    """Normalized Kraus update of *rho* by *record*."""
    rho = _as_state(rho, obs.dim)
    b = _apply_record(obs, rho.factor, record)
    tr = float(np.sum(np.abs(b) ** 2))
    if not tr > DEGENERATE_TRACE:
        raise NumericalContractError(f"degenerate posterior: trace {tr:.3e}")
    b = b / math.sqrt(tr)
    return DensityMatrix(b @ b.conj().T, rho.hbar, b)


# ---------------------------------------------------------------- Born limit


@dataclass
class BornLimitReport:
    eigenvalues: np.ndarray
    probabilities: np.ndarray
    taus: list
    masses: np.ndarray  # (len(taus), len(eigenvalues))
    window_halfwidth: float
    warnings: list = field(default_factory=list)

    @property
    def tails(self) -> np.ndarray:
        """Mass outside all windows, per tau."""
        return 1.0 - self.masses.sum(axis=1)

    def max_error(self) -> np.ndarray:
        return np.max(np.abs(self.masses - self.probabilities[None, :]), axis=1)

    def error_bound(self) -> np.ndarray:
        """Leading residual per tau: overlap from neighbours plus the window's own Gaussian tail."""
        lam = self.eigenvalues
        gap = float(np.min(np.diff(lam))) if lam.size > 1 else math.inf
        t = np.asarray(self.taus)
        w = self.window_halfwidth
        own = special.erfc(np.sqrt(t) * w)
        cross = 0.5 * special.erfc(np.sqrt(t) * (gap - w)) if math.isfinite(gap) else 0.0 * t
        return own + 2 * cross


def _distinct_eigen(dec, rtol=1e-9):
    lam = dec.eigenvalues
    scale = max(1.0, float(np.max(np.abs(lam))))
    groups = [[0]]
    for j in range(1, lam.size):
        if lam[j] - lam[groups[-1][-1]] <= rtol * scale:
            groups[-1].append(j)
        else:
            groups.append([j])
    return groups


def born_limit(rho, obs: ObservableSet, tau_list, window_halfwidth, quad_order=64, grid_count=None) -> BornLimitReport:
    """Husimi mass in a window around each eigenvalue of a single observable.

    Window masses use Gauss-Legendre quadrature of the numerator; the
    normalization is the trapezoidal integral over the automatic grid.  As
    tau grows the masses approach the Born probabilities ``tr(rho P_lambda)``.
    """
    if obs.n != 1:
        raise ValidationError("born_limit needs a single observable")
    w = float(window_halfwidth)
    if not w > 0:
        raise ValidationError("window_halfwidth must be > 0")
    taus = [_check_tau(t) for t in tau_list]
    if not taus:
        raise ValidationError("tau_list is empty")
    rho = _as_state(rho, obs.dim)
    dec = _spectra(obs)(0)
    groups = _distinct_eigen(dec)
    lam = np.array([dec.eigenvalues[g].mean() for g in groups])
    if lam.size > 1:
        gap = float(np.min(np.diff(lam)))
        if not gap > 2 * w:
            raise ValidationError(f"windows overlap: eigenvalue gap {gap:.4g} <= 2 * halfwidth {2 * w:.4g}")
    weights = np.sum(np.abs(dec.eigenvectors.conj().T @ rho.factor) ** 2, axis=1)
    probs = np.array([weights[g].sum() for g in groups])

    ev = SemigroupEvaluator(obs, route="commuting")
    xg, wg = np.polynomial.legendre.leggauss(quad_order)
    pts = (lam[:, None] + w * xg[None, :]).reshape(-1, 1)
    masses = np.empty((len(taus), lam.size))
    warnings = []
    for t, tau in enumerate(taus):
        count = grid_count or max(2001, int(math.ceil((np.ptp(lam) + 10 / math.sqrt(tau)) * math.sqrt(tau) * 20)) + 1)
        grid = auto_grid([dec.eigenvalues], tau, count)
        z = grid.integrate(ev.numerators([rho], grid.points(), [tau])[:, 0, 0])
        num = ev.numerators([rho], pts, [tau])[:, 0, 0].reshape(lam.size, quad_order)
        masses[t] = w * (num @ wg) / z
    return BornLimitReport(lam, probs, taus, masses, w, warnings)
