"""Batched ``tr(rho f(T_i))`` over many Hermitian matrices, with ``f = exp(c * .)``.

Tridiagonal batches go to the selected kernel backend; dense batches use
numpy.  Work is split into fixed chunks; every point is computed on its own,
so results do not depend on the chunking or on the thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _backend, _kernels_py
from .errors import ValidationError

CHUNK = 2048


def resolve_threads(threads=None) -> int:
    """Thread cap: explicit value, else ``HUSIMI_THREADS``, else auto; 0 means auto."""
    if threads is None:
        env = os.environ.get("HUSIMI_THREADS", "").strip()
        threads = int(env) if env else 0
    threads = int(threads)
    if threads < 0:
        raise ValidationError("threads must be >= 0")
    if threads == 0:
        threads = os.cpu_count() or 1
    return threads


def stack_factors(states, dim):
    """Concatenate state factors (``rho = B B^H``) embedded in ``dim`` levels.

    Returns ``(B, group)`` with trailing all-zero rows removed.
    """
    blocks, group = [], []
    for s, rho in enumerate(states):
        if rho.dim > dim:
            raise ValidationError(f"state dimension {rho.dim} exceeds observable dimension {dim}")
        b = np.zeros((dim, rho.factor.shape[1]), dtype=complex)
        b[: rho.dim] = rho.factor
        blocks.append(b)
        group.extend([s] * b.shape[1])
    factor = np.concatenate(blocks, axis=1)
    rows = np.flatnonzero(np.any(factor != 0, axis=1))
    support = int(rows[-1]) + 1 if rows.size else 1
    return factor[:support], np.asarray(group, dtype=np.intc)


def _map_chunks(fn, n_pts, threads):
    bounds = [(s, min(s + CHUNK, n_pts)) for s in range(0, n_pts, CHUNK)]
    threads = resolve_threads(threads)
    if threads == 1 or len(bounds) == 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def tridiagonal_traces(diag, off, factor, group, n_groups, coefs, backend=None, threads=None):
    """``out[i, g, t] = tr(rho_g exp(coefs[t] * T_i))`` for tridiagonal ``T_i``.

    ``diag`` is ``(N, d)`` real, ``off`` is ``(N, d-1)`` with ``off[i, j] = T_i[j, j+1]``.
    """
    kernel = _backend.get_kernel(backend)
    diag = np.ascontiguousarray(diag, dtype=float)
    off = np.asarray(off, dtype=complex)
    off_re = np.ascontiguousarray(off.real)
    off_im = np.ascontiguousarray(off.imag)
    b_re = np.ascontiguousarray(factor.real)
    b_im = np.ascontiguousarray(factor.imag)
    coefs = np.asarray(coefs, dtype=complex).ravel()
    c_re = np.ascontiguousarray(coefs.real)
    c_im = np.ascontiguousarray(coefs.imag)
    group = np.ascontiguousarray(group, dtype=np.intc)

    def run(lo, hi):
        re, im = kernel.tridiag_traces(diag[lo:hi], off_re[lo:hi], off_im[lo:hi], b_re, b_im, group, n_groups, c_re, c_im)
        return re + 1j * im

    parts = _map_chunks(run, diag.shape[0], threads)
    if not parts:
        return np.zeros((0, n_groups, coefs.size), dtype=complex)
    return np.concatenate(parts, axis=0)


def dense_traces(build, n_pts, factor, group, n_groups, coefs, threads=None):
    """Dense counterpart; ``build(lo, hi)`` returns the ``(hi-lo, d, d)`` matrices."""
    coefs = np.asarray(coefs, dtype=complex).ravel()

    def run(lo, hi):
        return _kernels_py.dense_traces(build(lo, hi), factor, group, n_groups, coefs)

    parts = _map_chunks(run, n_pts, threads)
    if not parts:
        return np.zeros((0, n_groups, coefs.size), dtype=complex)
    return np.concatenate(parts, axis=0)
