"""Dense Hermitian linear algebra: validation, eigendecomposition, functional calculus."""
from typing import Callable, NamedTuple

import numpy as np

from .errors import NonHermitianError, ValidationError

HERMITIAN_RTOL = 1e-12


def _scale(m):
    s = float(np.max(np.abs(m))) if m.size else 0.0
    return s if s > 0 else 1.0


def hermitian(m, rtol=HERMITIAN_RTOL):
    """Validate that *m* is Hermitian and return its symmetrized copy.

    The check is ``max|M - M^H| <= rtol * max|M|`` (absolute when ``M == 0``).
    The returned array is read-only.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValidationError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix has non-finite entries")
    asym = float(np.max(np.abs(m - m.conj().T)))
    scale = float(np.max(np.abs(m)))
    if asym > rtol * (scale if scale > 0 else 1.0):
        raise NonHermitianError(asym, scale)
    out = 0.5 * (m + m.conj().T)
    out.setflags(write=False)
    return out


class EigenDecomposition(NamedTuple):
    """Eigenpairs with ascending real ``eigenvalues`` and unitary ``eigenvectors`` (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self, f=None):
        """Return ``U diag(f(lambda)) U^H`` (``f`` defaults to the identity)."""
        lam = self.eigenvalues if f is None else f(self.eigenvalues)
        u = self.eigenvectors
        return (u * lam) @ u.conj().T


def eigh(op):
    """Hermitian eigendecomposition of *op* after the Hermiticity check."""
    h = hermitian(op)
    lam, vecs = np.linalg.eigh(h)
    return EigenDecomposition(lam, vecs)


def herm_func(op, f: Callable[[np.ndarray], np.ndarray], decomposition=None):
    """Apply a real scalar function to a Hermitian operator by functional calculus.

    Raises :class:`ValidationError` if ``f`` is undefined (non-finite or
    complex) at any eigenvalue.
    """
    dec = eigh(op) if decomposition is None else decomposition
    vals = np.asarray(f(dec.eigenvalues))
    if vals.shape != dec.eigenvalues.shape:
        raise ValidationError("f must map the eigenvalue vector elementwise")
    if np.iscomplexobj(vals):
        if np.any(vals.imag != 0):
            raise ValidationError("f must be real-valued on the spectrum")
        vals = vals.real
    bad = ~np.isfinite(vals)
    if np.any(bad):
        where = dec.eigenvalues[bad]
        raise ValidationError(f"f is undefined at eigenvalue(s) {where[:4].tolist()}")
    u = dec.eigenvectors
    out = (u * vals.astype(float)) @ u.conj().T
    return 0.5 * (out + out.conj().T)


def trace_product(a, b):
    """``tr(a @ b)`` from the entrywise products of ``a`` and ``b.T``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape != b.T.shape:
        raise ValidationError(f"trace_product shape mismatch: {a.shape} vs {b.shape}")
    return complex(np.sum(a * b.T))


def expm_hermitian(op, scale):
    """``exp(scale * op)`` for Hermitian *op* and real *scale*."""
    return herm_func(op, lambda lam: np.exp(scale * lam))


def bandwidth(m, rtol=1e-13):
    """Largest ``|i - j|`` with a non-negligible entry ``m[i, j]``."""
    m = np.asarray(m)
    tol = rtol * _scale(m)
    rows, cols = np.nonzero(np.abs(m) > tol)
    return int(np.max(np.abs(rows - cols))) if rows.size else 0
