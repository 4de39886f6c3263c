"""Uniform phase-space grids, trapezoidal quadrature and gridded distributions."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize

from .errors import NumericalContractError, ValidationError

NEG_CLAMP = 1e-14
COVERAGE_TOL = 1e-4


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValidationError(f"axis needs finite min < max, got [{self.lo}, {self.hi}]")
        if int(self.count) != self.count or self.count < 2:
            raise ValidationError(f"axis needs count >= 2, got {self.count}")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)

    def weights(self) -> np.ndarray:
        w = np.full(self.count, self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w


@dataclass(frozen=True)
class PhaseGrid:
    """Rectangular uniform grid over R^n, one :class:`Axis` per observable."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(a if isinstance(a, Axis) else Axis(*a) for a in self.axes)
        if not axes:
            raise ValidationError("grid needs at least one axis")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform(cls, lo, hi, count, ndim) -> "PhaseGrid":
        return cls(tuple(Axis(lo, hi, count) for _ in range(ndim)))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(a.count for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def steps(self) -> np.ndarray:
        return np.array([a.step for a in self.axes])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.steps))

    def axis_values(self):
        return [a.values() for a in self.axes]

    def points(self) -> np.ndarray:
        """All grid points, shape ``(size, ndim)``, row-major (last axis fastest)."""
        mesh = np.meshgrid(*self.axis_values(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def trapezoid_weights(self) -> np.ndarray:
        w = self.axes[0].weights()
        for a in self.axes[1:]:
            w = np.multiply.outer(w, a.weights())
        return w

    def integrate(self, values) -> float:
        values = np.asarray(values).reshape(self.shape)
        return float(np.sum(values * self.trapezoid_weights()))

    def index_of(self, point) -> tuple:
        """Index of the grid node nearest to *point*."""
        idx = []
        for a, x in zip(self.axes, point):
            idx.append(int(np.clip(round((x - a.lo) / a.step), 0, a.count - 1)))
        return tuple(idx)

    def as_dict(self):
        return {"axes": [{"min": a.lo, "max": a.hi, "count": a.count} for a in self.axes]}


def auto_grid(spectra, tau, count) -> PhaseGrid:
    """Per-axis eigenvalue range padded by ``5/sqrt(tau)``."""
    pad = 5.0 / math.sqrt(tau)
    axes = []
    for lam in spectra:
        lam = np.asarray(lam, dtype=float)
        axes.append(Axis(float(lam.min()) - pad, float(lam.max()) + pad, count))
    return PhaseGrid(tuple(axes))


def outside_mass_estimate(grid: PhaseGrid, values) -> float:
    """Rough fraction of mass beyond the grid boundary.

    Per axis and side, the last two layers are extrapolated as a geometric
    tail; Gaussian-like decay makes this an overestimate.
    """
    v = np.asarray(values, dtype=float).reshape(grid.shape)
    total = grid.integrate(v)
    if total <= 0:
        return 1.0
    est = 0.0
    for k, ax in enumerate(grid.axes):
        # density of each layer along axis k, integrated over the remaining axes
        w_other = np.ones(())
        for i, other in enumerate(grid.axes):
            if i != k:
                w_other = np.multiply.outer(w_other, other.weights())
        layer = (np.moveaxis(v, k, 0) * w_other).reshape(ax.count, -1).sum(axis=1)
        for edge, inner in ((layer[0], layer[1]), (layer[-1], layer[-2])):
            if edge <= 0:
                continue
            q = min(edge / inner, 0.999) if inner > 0 else 0.999
            est += edge * ax.step * q / (1 - q)
    return est / total


@dataclass
class QuasiDistribution:
    """Real values sampled on a :class:`PhaseGrid` plus provenance."""

    grid: PhaseGrid
    values: np.ndarray
    tau: float
    hbar: float = 1.0
    normalized: bool = False
    labels: tuple = ()
    normalization: float | None = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)

    def integral(self) -> float:
        return self.grid.integrate(self.values)

    def at(self, point) -> float:
        """Value at a grid node; raises if *point* is not (to rounding) a node."""
        idx = self.grid.index_of(point)
        for a, i, x in zip(self.grid.axes, idx, point):
            if abs(a.lo + i * a.step - x) > 1e-9 * max(a.step, 1.0):
                raise ValidationError(f"point {tuple(point)} is not a grid node")
        return float(self.values[idx])

    @cached_property
    def mass_outside(self) -> float:
        return outside_mass_estimate(self.grid, self.values)

    def min(self) -> float:
        return float(np.min(self.values))


def normalize_density(grid, numerator, tau, hbar=1.0, labels=(), normalization=None, check_sign=True):
    """Normalize a non-negative numerator by its trapezoidal integral over *grid*.

    Values in ``[-1e-14, 0)`` after normalization are clamped to 0; anything
    lower raises :class:`NumericalContractError`.
    """
    num = np.asarray(numerator, dtype=float).reshape(grid.shape)
    if not np.all(np.isfinite(num)):
        raise NumericalContractError("non-finite semigroup trace")
    z = grid.integrate(num) if normalization is None else float(normalization)
    if not z > 0:
        raise NumericalContractError(f"normalization constant is {z!r}; grid misses the density")
    vals = num / z
    if check_sign:
        low = float(vals.min())
        if low < -NEG_CLAMP:
            raise NumericalContractError(f"negative density value {low:.3e} below -{NEG_CLAMP:g}")
        vals = np.where(vals < 0, 0.0, vals)
    dist = QuasiDistribution(grid, vals, tau, hbar, True, tuple(labels), z)
    out = dist.mass_outside
    if out > COVERAGE_TOL:
        dist.warnings.append(f"grid coverage: estimated mass outside grid {out:.2e} > {COVERAGE_TOL:g}")
    return dist


def fit_gaussian(dist: QuasiDistribution):
    """Least-squares fit of an axis-aligned Gaussian ``A exp(-sum (a_k-m_k)^2/(2 v_k))``.

    Returns ``(means, variances)``.
    """
    pts = dist.grid.points()
    y = dist.values.ravel()
    n = dist.grid.ndim
    w = dist.grid.trapezoid_weights().ravel()
    mass = float(np.sum(w * y))
    m0 = (pts * (w * y)[:, None]).sum(0) / mass
    v0 = ((pts - m0) ** 2 * (w * y)[:, None]).sum(0) / mass

    def model(_, *theta):
        amp = theta[0]
        mu = np.asarray(theta[1 : 1 + n])
        var = np.asarray(theta[1 + n :])
        return amp * np.exp(-0.5 * np.sum((pts - mu) ** 2 / var, axis=1))

    p0 = [float(y.max()), *m0, *v0]
    with warnings.catch_warnings():
        # exact fits leave no residual to estimate a covariance from
        warnings.simplefilter("ignore", optimize.OptimizeWarning)
        popt, _ = optimize.curve_fit(model, None, y, p0=p0, xtol=1e-14, ftol=1e-14, maxfev=20000)
    return np.asarray(popt[1 : 1 + n]), np.asarray(popt[1 + n :])
