"""Closed forms for the spin-1/2 density with observables ``(Sx, Sy, Sz)``.

With ``sum_k S_k^2 = 3 I`` the exponent is ``3 + r^2 - 2 r.S`` and

    tr(rho exp(-tau sum_k (S_k - r_k)^2))
        = exp(-tau (3 + r^2)) (cosh(2 tau r) + (r.r_rho / r) sinh(2 tau r)).

The normalized density is independent of constant shifts of the exponent;
``drop`` below removes such a constant (``drop=3`` removes ``sum_k S_k^2``,
``drop=2`` gives the prefactor ``exp(-tau (1 + r^2))``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalContractError, ValidationError
from .husimi import _check_tau

SERIES_CUTOFF = 1e-6
EXP_GUARD = 700.0


def _bloch(r_rho):
    v = np.asarray(r_rho, dtype=float).reshape(3)
    norm = float(np.linalg.norm(v))
    if norm > 1 + 1e-12:
        raise ValidationError(f"Bloch vector norm {norm:.6g} exceeds 1 (not a state)")
    return v


def _points(r):
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != 3:
        raise ValidationError("points must have 3 components")
    return r


def _cos_dir(r, r_rho):
    """``(|r|, r.r_rho / |r|)`` with the direction term set to 0 at the origin."""
    rad = np.linalg.norm(r, axis=-1)
    dot = r @ r_rho
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.where(rad > 0, dot / np.where(rad > 0, rad, 1.0), 0.0)
    return rad, dot, m


def _sinh_term(rad, dot, tau):
    """``(r.r_rho / r) sinh(2 tau r)`` with its even series below ``r = 1e-6``."""
    x = 2.0 * tau * rad
    small = rad < SERIES_CUTOFF
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        direct = dot / np.where(small, 1.0, rad) * np.sinh(x)
    series = 2.0 * tau * dot * (1.0 + x * x / 6.0)
    return np.where(small, series, direct)


def spin_numerator(r_rho, r, tau, drop=0.0):
    """``exp(tau * drop) * tr(rho exp(-tau sum_k (S_k - r_k)^2))``.

    Evaluated in the regrouped form, which cannot overflow.  ``r`` may be a
    single point or an array of shape ``(..., 3)``.
    """
    tau = _check_tau(tau)
    r_rho = _bloch(r_rho)
    r = _points(r)
    rad, _, m = _cos_dir(r, r_rho)
    shift = tau * (drop - 2.0)
    out = 0.5 * (
        (1.0 + m) * np.exp(shift - tau * (rad - 1.0) ** 2) + (1.0 - m) * np.exp(shift - tau * (rad + 1.0) ** 2)
    )
    return out[()] if np.ndim(out) == 0 else out


def spin_numerator_bloch(r_rho, r, tau):
    """Displayed Bloch form ``exp(-tau(1 + r^2)) (cosh(2 tau r) + (r.r_rho/r) sinh(2 tau r))``.

    Equals ``spin_numerator(..., drop=2)``.  Raises when ``2 tau r`` exceeds
    the exponent guard; use :func:`spin_numerator` there.
    """
    tau = _check_tau(tau)
    r_rho = _bloch(r_rho)
    r = _points(r)
    rad, dot, _ = _cos_dir(r, r_rho)
    if np.any(2.0 * tau * rad > EXP_GUARD):
        raise NumericalContractError("cosh/sinh overflow: 2 tau r > 700; use the regrouped form")
    out = np.exp(-tau * (1.0 + rad**2)) * (np.cosh(2.0 * tau * rad) + _sinh_term(rad, dot, tau))
    return out[()] if np.ndim(out) == 0 else out


def spin_normalization(tau, drop=0.0) -> float:
    """``\\int spin_numerator d^3r = (pi/tau)^(3/2) (2 tau + 1) exp((drop - 2) tau)``.

    With ``drop=3`` this is ``(pi/tau)^(3/2) (2 tau + 1) e^tau``.
    """
    tau = _check_tau(tau)
    return (math.pi / tau) ** 1.5 * (2.0 * tau + 1.0) * math.exp((drop - 2.0) * tau)


def _c_tau(tau):
    return math.pi * (4.0 + 2.0 / tau)


def spin_husimi(r_rho, r, tau, form="regrouped"):
    """Normalized finite-tau spin density.

    Args:
        r_rho: Bloch vector of the state (norm at most 1).
        r: point or array of points, shape ``(..., 3)``.
        tau: duration, > 0.
        form: ``"regrouped"`` uses
            ``(sqrt(tau/pi)/c_tau) ((1+m) e^{-tau(r-1)^2} + (1-m) e^{-tau(r+1)^2})``
            with ``m = n.r_rho`` and ``c_tau = pi (4 + 2/tau)``; ``"bloch"``
            uses the cosh/sinh numerator over its normalization.

    Returns:
        Density value(s), all >= 0.
    """
    tau = _check_tau(tau)
    if form == "regrouped":
        r_rho = _bloch(r_rho)
        r = _points(r)
        rad, _, m = _cos_dir(r, r_rho)
        out = (math.sqrt(tau / math.pi) / _c_tau(tau)) * (
            (1.0 + m) * np.exp(-tau * (rad - 1.0) ** 2) + (1.0 - m) * np.exp(-tau * (rad + 1.0) ** 2)
        )
        out = np.maximum(out, 0.0)
        return out[()] if np.ndim(out) == 0 else out
    if form == "bloch":
        return spin_numerator_bloch(r_rho, r, tau) / spin_normalization(tau, drop=2.0)
    raise ValidationError(f"unknown form {form!r}")


def spin_kernel(tau, r, r_prime):
    """``(tau/pi)^(3/2) exp(-tau(1 + r^2)) / (2 tau + 1) * exp(2 tau r.r')``.

    Raises :class:`NumericalContractError` when ``2 tau |r.r'|`` exceeds 700.
    """
    tau = _check_tau(tau)
    r = _points(r)
    rp = _points(r_prime)
    dot = np.sum(r * rp, axis=-1)
    if np.any(2.0 * tau * np.abs(dot) > EXP_GUARD):
        raise NumericalContractError(
            "kernel exponent 2 tau r.r' exceeds 700; rescale (combine with exp(-tau r^2) in log space)"
        )
    rad2 = np.sum(r * r, axis=-1)
    out = (tau / math.pi) ** 1.5 * np.exp(-tau * (1.0 + rad2)) / (2.0 * tau + 1.0) * np.exp(2.0 * tau * dot)
    return out[()] if np.ndim(out) == 0 else out


# ------------------------------------------------------------ shell limit


@dataclass(frozen=True)
class SphereBin:
    z_lo: float
    z_hi: float
    phi_lo: float
    phi_hi: float

    @property
    def solid_angle(self) -> float:
        return (self.z_hi - self.z_lo) * (self.phi_hi - self.phi_lo)

    @property
    def center(self) -> np.ndarray:
        """Unit vector at the bin's area midpoint (pole for polar caps)."""
        if self.z_hi >= 1.0 and self.phi_hi - self.phi_lo >= 2 * math.pi - 1e-12:
            return np.array([0.0, 0.0, 1.0])
        if self.z_lo <= -1.0 and self.phi_hi - self.phi_lo >= 2 * math.pi - 1e-12:
            return np.array([0.0, 0.0, -1.0])
        z = 0.5 * (self.z_lo + self.z_hi)
        phi = 0.5 * (self.phi_lo + self.phi_hi)
        s = math.sqrt(max(0.0, 1.0 - z * z))
        return np.array([s * math.cos(phi), s * math.sin(phi), z])


def equal_area_bins(n_bins=80):
    """Partition of the unit sphere into *n_bins* regions of equal solid angle.

    Two polar caps plus collars of equal-width cells, with collar counts
    chosen so the collar height stays close to the cell width (the recursive
    zonal scheme of Leopardi, restricted to the 2-sphere).
    """
    n = int(n_bins)
    if n < 2:
        raise ValidationError("need at least 2 bins")
    area = 4.0 * math.pi / n
    if n == 2:
        return [SphereBin(0.0, 1.0, 0.0, 2 * math.pi), SphereBin(-1.0, 0.0, 0.0, 2 * math.pi)]
    theta_c = math.acos(1.0 - 2.0 / n)
    ideal = math.sqrt(area)
    n_collars = max(1, round((math.pi - 2 * theta_c) / ideal))
    collar = (math.pi - 2 * theta_c) / n_collars
    # ideal cell counts per collar, rounded with carried error
    counts, carry = [], 0.0
    for i in range(n_collars):
        t0 = theta_c + i * collar
        t1 = t0 + collar
        want = 2 * math.pi * (math.cos(t0) - math.cos(t1)) / area + carry
        c = max(1, round(want))
        carry = want - c
        counts.append(c)
    counts[-1] += (n - 2) - sum(counts)
    bins = [SphereBin(1.0 - 2.0 / n, 1.0, 0.0, 2 * math.pi)]
    cum = 1
    for c in counts:
        z_hi = 1.0 - 2.0 * cum / n
        z_lo = 1.0 - 2.0 * (cum + c) / n
        for j in range(c):
            bins.append(SphereBin(z_lo, z_hi, 2 * math.pi * j / c, 2 * math.pi * (j + 1) / c))
        cum += c
    bins.append(SphereBin(-1.0, -1.0 + 2.0 / n, 0.0, 2 * math.pi))
    return bins


@dataclass
class ShellReport:
    r_rho: np.ndarray
    taus: list
    halfwidth: float
    bins: list
    shell_mass: np.ndarray  # (T,)
    bin_masses: np.ndarray  # (T, K)
    center_density: np.ndarray  # (T, K) radial integral along each bin centre
    expected: np.ndarray = field(init=False)  # (K,) (1 + n.r_rho)/(4 pi) at centres

    def __post_init__(self):
        self.expected = np.array([(1.0 + b.center @ self.r_rho) / (4 * math.pi) for b in self.bins])

    @property
    def off_shell_mass(self) -> np.ndarray:
        return 1.0 - self.shell_mass

    @property
    def mean_density(self) -> np.ndarray:
        """Bin mass per unit solid angle."""
        return self.bin_masses / np.array([b.solid_angle for b in self.bins])[None, :]

    def bin_index(self, direction) -> int:
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        z = float(d[2])
        phi = math.atan2(d[1], d[0]) % (2 * math.pi)
        for k, b in enumerate(self.bins):
            if b.z_lo <= z <= b.z_hi and b.phi_lo <= phi <= b.phi_hi:
                return k
        raise ValidationError("direction not found in any bin")


def _radial_nodes(halfwidth, order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 1.0 + halfwidth * x, halfwidth * w


def shell_limit(r_rho, tau_list, shell_halfwidth, n_bins=80, order=96) -> ShellReport:
    """Mass of the spin density inside the shell ``1 - w <= r <= 1 + w``.

    Per bin, the mass is integrated by Gauss-Legendre quadrature in ``r``,
    ``z = cos(theta)`` and ``phi``; the center density is the radial integral
    ``\\int r^2 H(r n) dr`` along the bin's centre direction ``n``, which tends
    to ``(1 + n.r_rho)/(4 pi)``.
    """
    r_rho = _bloch(r_rho)
    w = float(shell_halfwidth)
    if not 0 < w < 0.5:
        raise ValidationError("shell_halfwidth must lie in (0, 0.5)")
    taus = [_check_tau(t) for t in tau_list]
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValidationError("tau_list must be ascending")
    bins = equal_area_bins(n_bins)
    rr, wr = _radial_nodes(w, order)
    xg, wg = np.polynomial.legendre.leggauss(12)
    shell = np.empty(len(taus))
    masses = np.empty((len(taus), len(bins)))
    centre = np.empty((len(taus), len(bins)))
    for t, tau in enumerate(taus):
        for k, b in enumerate(bins):
            z = 0.5 * (b.z_hi + b.z_lo) + 0.5 * (b.z_hi - b.z_lo) * xg
            phi = 0.5 * (b.phi_hi + b.phi_lo) + 0.5 * (b.phi_hi - b.phi_lo) * xg
            wz = 0.5 * (b.z_hi - b.z_lo) * wg
            wp = 0.5 * (b.phi_hi - b.phi_lo) * wg
            s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
            dirs = np.stack(np.broadcast_arrays(s[:, None] * np.cos(phi)[None], s[:, None] * np.sin(phi)[None], z[:, None]), -1)
            pts = rr[:, None, None, None] * dirs[None]
            h = spin_husimi(r_rho, pts, tau)
            masses[t, k] = np.einsum("rzp,r,z,p->", h, wr * rr**2, wz, wp)
            line = spin_husimi(r_rho, rr[:, None] * b.center[None, :], tau)
            centre[t, k] = float(np.sum(line * rr**2 * wr))
        shell[t] = masses[t].sum()
    return ShellReport(r_rho, taus, w, bins, shell, masses, centre)
