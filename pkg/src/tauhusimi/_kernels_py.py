"""Numpy implementation of the spectral-trace kernels.

``tridiag_traces`` mirrors the compiled ``tauhusimi._kernels.tridiag_traces``
argument for argument; ``dense_traces`` handles exponents with no band
structure and has no compiled counterpart.
"""
import numpy as np

_CHUNK = 512


def _traces_from_projections(lam, proj, group, n_groups, coef):
    # proj[i, k, r] = u_ik^H B_r ; weights summed per column group
    weights = np.zeros((lam.shape[0], n_groups, lam.shape[1]))
    absq = proj.real**2 + proj.imag**2
    for g in range(n_groups):
        cols = np.flatnonzero(group == g)
        if cols.size:
            weights[:, g, :] = absq[:, :, cols].sum(axis=2)
    # exp(c * lam) for every coefficient: (i, t, k)
    phase = np.exp(coef[None, :, None] * lam[:, None, :])
    return np.einsum("igk,itk->igt", weights, phase)


def tridiag_traces(diag, off_re, off_im, b_re, b_im, group, n_groups, coef_re, coef_im):
    diag = np.asarray(diag, dtype=float)
    n_pts, d = diag.shape
    if d < 2:
        raise ValueError("tridiagonal kernel needs dim >= 2")
    off = np.asarray(off_re, dtype=float) + 1j * np.asarray(off_im, dtype=float)
    if off.shape != (n_pts, d - 1):
        raise ValueError("off-diagonal shape mismatch")
    factor = np.asarray(b_re, dtype=float) + 1j * np.asarray(b_im, dtype=float)
    support, n_cols = factor.shape
    if support > d:
        raise ValueError("state factor shape mismatch")
    group = np.asarray(group)
    if group.shape != (n_cols,):
        raise ValueError("group length must equal factor columns")
    if n_cols and (group.min() < 0 or group.max() >= n_groups):
        raise ValueError("group index out of range")
    coef = np.asarray(coef_re, dtype=float) + 1j * np.asarray(coef_im, dtype=float)

    out = np.empty((n_pts, n_groups, coef.size), dtype=complex)
    idx = np.arange(d - 1)
    for start in range(0, n_pts, _CHUNK):
        sl = slice(start, min(start + _CHUNK, n_pts))
        o = off[sl]
        mag = np.abs(o)
        unit = np.where(mag > 0, np.conj(o) / np.where(mag > 0, mag, 1.0), 1.0)
        phase = np.ones((o.shape[0], d), dtype=complex)
        phase[:, 1:] = np.cumprod(unit, axis=1)
        sym = np.zeros((o.shape[0], d, d))
        sym[:, np.arange(d), np.arange(d)] = diag[sl]
        sym[:, idx, idx + 1] = mag
        sym[:, idx + 1, idx] = mag
        lam, vecs = np.linalg.eigh(sym)
        c = np.conj(phase[:, :support, None]) * factor[None, :, :]
        proj = np.matmul(np.swapaxes(vecs[:, :support, :], 1, 2), c)
        out[sl] = _traces_from_projections(lam, proj, group, n_groups, coef)
    return out.real.copy(), out.imag.copy()


def dense_traces(mats, factor, group, n_groups, coef):
    """Same contraction as ``tridiag_traces`` for a batch of dense Hermitian matrices."""
    mats = np.asarray(mats)
    factor = np.asarray(factor, dtype=complex)
    group = np.asarray(group)
    coef = np.asarray(coef, dtype=complex)
    support = factor.shape[0]
    out = np.empty((mats.shape[0], n_groups, coef.size), dtype=complex)
    for start in range(0, mats.shape[0], _CHUNK):
        sl = slice(start, min(start + _CHUNK, mats.shape[0]))
        lam, vecs = np.linalg.eigh(mats[sl])
        proj = np.matmul(np.conj(np.swapaxes(vecs[:, :support, :], 1, 2)), factor[None])
        out[sl] = _traces_from_projections(lam, proj, group, n_groups, coef)
    return out
