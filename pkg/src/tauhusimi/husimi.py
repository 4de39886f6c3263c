"""Finite-time Husimi densities from the Gaussian semigroup.

For observables ``A_1..A_n`` and a center ``a`` the semigroup is
``G_tau(a) = exp(-tau * sum_k (A_k - a_k)^2)``; the density is
``tr(rho G_tau(a))`` normalized over ``a`` by trapezoidal quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _spectral
from .errors import ValidationError
from .grids import PhaseGrid, QuasiDistribution, normalize_density
from .linalg import bandwidth, herm_func
from .models import DensityMatrix, ObservableSet, coherent_amplitudes


def _check_tau(tau):
    tau = float(tau)
    if not (tau > 0 and math.isfinite(tau)):
        raise ValidationError(f"tau must be > 0 (the semigroup density is undefined at tau={tau})")
    return tau


@dataclass(frozen=True, eq=False)
class GaussianSemigroupPoint:
    center: np.ndarray
    tau: float
    operator: np.ndarray


def exponent_at(obs: ObservableSet, a) -> np.ndarray:
    """``sum_k (A_k - a_k)^2`` as a dense matrix."""
    a = np.asarray(a, dtype=float).ravel()
    if a.size != obs.n or not np.all(np.isfinite(a)):
        raise ValidationError(f"center must be a finite {obs.n}-vector")
    eye = np.eye(obs.dim)
    out = np.zeros((obs.dim, obs.dim), dtype=complex)
    for op, c in zip(obs.observables, a):
        shifted = op - c * eye
        out += shifted @ shifted
    return out


def semigroup_at(obs: ObservableSet, a, tau) -> GaussianSemigroupPoint:
    tau = _check_tau(tau)
    op = herm_func(exponent_at(obs, a), lambda lam: np.exp(-tau * lam))
    return GaussianSemigroupPoint(np.asarray(a, dtype=float), tau, op)


class SemigroupEvaluator:
    """Batched semigroup traces ``tr(rho_s G_tau_t(a_i))`` for one observable set.

    The route is chosen once per observable set:

    * ``"commuting"``: one shared eigenbasis (single observable or mutually
      commuting set); the trace is a Gaussian mixture over joint eigenvalues.
    * ``"tridiagonal"``: every exponent is Hermitian tridiagonal (truncated
      ``X, P`` and all qubit sets); handled by the compiled kernel when built.
    * ``"dense"``: anything else, per-point dense ``eigh``.
    """

    def __init__(self, obs: ObservableSet, backend=None, threads=None, route=None):
        self.obs = obs
        self.backend = backend
        self.threads = threads
        mats = obs.observables
        self._square = sum(m @ m for m in mats)
        if route is None:
            if obs.n == 1 or obs.commuting():
                route = "commuting"
            elif obs.dim >= 2 and max(bandwidth(m) for m in (*mats, self._square)) <= 1:
                route = "tridiagonal"
            else:
                route = "dense"
        if route not in ("commuting", "tridiagonal", "dense"):
            raise ValidationError(f"unknown route {route!r}")
        self.route = route
        if route == "commuting":
            self._joint_basis()

    def _joint_basis(self):
        mats = self.obs.observables
        # generic combination separates joint eigenspaces
        weights = [1.0 / (k + math.sqrt(2.0)) for k in range(len(mats))]
        mix = sum(w * m for w, m in zip(weights, mats))
        _, u = np.linalg.eigh(0.5 * (mix + mix.conj().T))
        rot = [u.conj().T @ m @ u for m in mats]
        for r in rot:
            off = r - np.diag(np.diag(r))
            if np.max(np.abs(off)) > 1e-10 * max(1.0, np.max(np.abs(r))):
                raise ValidationError("observables share no common eigenbasis")
        self._basis = u
        self._joint = np.stack([np.diag(r).real for r in rot])  # (n, d)

    def _prepare(self, states):
        states = [rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho) for rho in states]
        return _spectral.stack_factors(states, self.obs.dim), len(states)

    def numerators(self, states, points, taus) -> np.ndarray:
        """Real array ``(N, S, T)`` of semigroup traces."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.obs.n:
            raise ValidationError(f"points must have {self.obs.n} coordinates")
        taus = np.array([_check_tau(t) for t in np.atleast_1d(taus)])
        (factor, group), n_states = self._prepare(states)
        if self.route == "commuting":
            return self._commuting(points, factor, group, n_states, taus)
        mats = np.stack(self.obs.observables)
        r2 = np.sum(points**2, axis=1)
        if self.route == "tridiagonal":
            diag_a = np.stack([np.diag(m).real for m in mats])  # (n, d)
            off_a = np.stack([np.diag(m, 1) for m in mats])  # (n, d-1)
            diag = np.diag(self._square).real[None] - 2.0 * points @ diag_a + r2[:, None]
            off = np.diag(self._square, 1)[None] - 2.0 * points @ off_a
            out = _spectral.tridiagonal_traces(
                diag, off, factor, group, n_states, -taus, backend=self.backend, threads=self.threads
            )
        else:
            eye = np.eye(self.obs.dim)

            def build(lo, hi):
                p = points[lo:hi]
                lin = np.tensordot(p, mats, axes=(1, 0))
                return self._square[None] - 2.0 * lin + r2[lo:hi, None, None] * eye[None]

            out = _spectral.dense_traces(build, points.shape[0], factor, group, n_states, -taus, self.threads)
        return out.real

    def _commuting(self, points, factor, group, n_states, taus):
        u = self._basis[: factor.shape[0]]
        proj = u.conj().T @ factor
        absq = np.abs(proj) ** 2
        weights = np.stack([absq[:, group == s].sum(axis=1) for s in range(n_states)])  # (S, d)
        out = np.empty((points.shape[0], n_states, taus.size))
        for lo in range(0, points.shape[0], _spectral.CHUNK):
            p = points[lo : lo + _spectral.CHUNK]
            dist2 = np.sum((self._joint.T[None] - p[:, None, :]) ** 2, axis=2)  # (N, d)
            for t, tau in enumerate(taus):
                out[lo : lo + p.shape[0], :, t] = np.exp(-tau * dist2) @ weights.T
        return out


def _evaluator(obs, evaluator, backend, threads):
    if evaluator is not None:
        return evaluator
    return SemigroupEvaluator(obs, backend=backend, threads=threads)


def _check_grid(obs, grid):
    if grid.ndim != obs.n:
        raise ValidationError(f"grid has {grid.ndim} axes but there are {obs.n} observables")


def numerator_grid(rho, obs, grid: PhaseGrid, tau, evaluator=None, backend=None, threads=None) -> np.ndarray:
    """Unnormalized ``tr(rho G_tau(a))`` on the grid (grid-shaped array)."""
    _check_grid(obs, grid)
    ev = _evaluator(obs, evaluator, backend, threads)
    return ev.numerators([rho], grid.points(), [tau])[:, 0, 0].reshape(grid.shape)


def husimi_grids(states, obs, grid: PhaseGrid, taus, evaluator=None, backend=None, threads=None):
    """Normalized densities for several states and durations; result ``[state][tau]``."""
    _check_grid(obs, grid)
    ev = _evaluator(obs, evaluator, backend, threads)
    taus = list(np.atleast_1d(taus))
    num = ev.numerators(states, grid.points(), taus)
    return [
        [normalize_density(grid, num[:, s, t], float(tau), obs.hbar, obs.labels) for t, tau in enumerate(taus)]
        for s in range(len(states))
    ]


def husimi_grid(rho, obs, grid: PhaseGrid, tau, normalization=None, evaluator=None, backend=None, threads=None):
    """Finite-time Husimi density of *rho* on *grid*.

    The numerator is normalized by its trapezoidal integral over *grid*
    unless *normalization* is given.  Estimated mass beyond the grid above
    ``1e-4`` is reported in ``result.warnings``.
    """
    num = numerator_grid(rho, obs, grid, tau, evaluator, backend, threads)
    return normalize_density(grid, num, float(tau), obs.hbar, obs.labels, normalization)


def normalization_constant(rho, obs, grid: PhaseGrid, tau, evaluator=None, backend=None, threads=None) -> float:
    """Trapezoidal integral of the unnormalized numerator over *grid*."""
    return grid.integrate(numerator_grid(rho, obs, grid, tau, evaluator, backend, threads))


def coherent_reference(rho: DensityMatrix, grid: PhaseGrid, hbar=None) -> np.ndarray:
    """Coherent-state Husimi ``<alpha|rho|alpha> / (2 pi hbar)``, ``alpha = (x + i p)/sqrt(2 hbar)``."""
    if grid.ndim != 2:
        raise ValidationError("coherent reference needs a 2-D (x, p) grid")
    hbar = rho.hbar if hbar is None else hbar
    pts = grid.points()
    alphas = (pts[:, 0] + 1j * pts[:, 1]) / math.sqrt(2 * hbar)
    b = rho.factor
    out = np.empty(len(alphas))
    for lo in range(0, len(alphas), 4096):
        amps = coherent_amplitudes(alphas[lo : lo + 4096], rho.dim)
        proj = amps.conj() @ b
        out[lo : lo + len(amps)] = np.sum(np.abs(proj) ** 2, axis=1)
    return (out / (2 * math.pi * hbar)).reshape(grid.shape)


@dataclass
class LimitReport:
    taus: list
    distributions: list
    consecutive_sup: list
    reference_sup: list | None = None
    warnings: list = field(default_factory=list)

    @property
    def reference_monotone(self) -> bool:
        r = self.reference_sup
        return r is not None and all(b <= a for a, b in zip(r, r[1:]))


def husimi_limit_diagnostic(rho, obs, grid, taus, evaluator=None, backend=None, threads=None) -> LimitReport:
    """Densities along an ascending duration ladder and their sup-norm gaps.

    For the canonical pair ``(X, P)`` the distance to the coherent-state
    Husimi function is reported as well.
    """
    taus = [_check_tau(t) for t in taus]
    if len(taus) < 2 or any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValidationError("tau_list must be strictly ascending with at least two entries")
    dists = husimi_grids([rho], obs, grid, taus, evaluator, backend, threads)[0]
    gaps = [float(np.max(np.abs(b.values - a.values))) for a, b in zip(dists, dists[1:])]
    ref = None
    if obs.is_canonical_pair():
        q = coherent_reference(rho, grid, obs.hbar)
        ref = [float(np.max(np.abs(d.values - q))) for d in dists]
    warnings = sorted({w for d in dists for w in d.warnings})
    return LimitReport(taus, dists, gaps, ref, warnings)
