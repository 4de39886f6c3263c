# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled spectral-trace kernel.

For a batch of Hermitian tridiagonal matrices ``T_i`` and a stacked state
factor ``B`` (``rho_g = B_g B_g^H`` for each column group ``g``) this computes

    out[i, g, t] = sum_k exp(c_t * lam_ik) * || u_ik^H B_g ||^2

where ``(lam_ik, u_ik)`` are the eigenpairs of ``T_i``.  Each ``T_i`` is gauged
to a real symmetric tridiagonal matrix by a diagonal unitary.  The implicit
QL iteration with Wilkinson shifts then runs on it, and its Givens rotations
are applied straight to the rows of ``B^T`` rather than to an identity
matrix.  The eigenvector matrix is never formed, so a point costs
``O(d^2 * rank)`` instead of ``O(d^3)``.  The loop body holds no Python
objects and runs without the GIL, so callers may split the batch across
threads.
"""
import numpy as np

from libc.math cimport cos, exp, fabs, hypot, sin, sqrt

cdef enum:
    MAX_SWEEPS = 64


cdef inline double _norm2(double a, double b) noexcept nogil:
    # plain sqrt unless squaring could overflow
    if fabs(a) < 1e150 and fabs(b) < 1e150:
        return sqrt(a * a + b * b)
    return hypot(a, b)


cdef int _ql_project(Py_ssize_t n, double* d, double* e, double* x, Py_ssize_t m) noexcept nogil:
    # d: diagonal (overwritten by eigenvalues), e: off-diagonal with e[n-1] = 0.
    # x: row-major (n, m); row i holds the components along basis vector i and
    # ends up holding the components along eigenvector i.
    cdef Py_ssize_t l, mm, i, k, it
    cdef double f = 0.0, tst1 = 0.0, eps = 2.220446049250313e-16
    cdef double g, p, r, inv, dl1, h, c, c2, c3, el1, s, s2, xa, xb
    for l in range(n):
        tst1 = max(tst1, fabs(d[l]) + fabs(e[l]))
        mm = l
        while mm < n:
            if fabs(e[mm]) <= eps * tst1:
                break
            mm += 1
        if mm > l:
            it = 0
            while True:
                it += 1
                if it > MAX_SWEEPS:
                    return -1
                g = d[l]
                p = (d[l + 1] - g) / (2.0 * e[l])
                r = _norm2(p, 1.0)
                if p < 0:
                    r = -r
                d[l] = e[l] / (p + r)
                d[l + 1] = e[l] * (p + r)
                dl1 = d[l + 1]
                h = g - d[l]
                for i in range(l + 2, n):
                    d[i] -= h
                f += h
                p = d[mm]
                c = 1.0
                c2 = c
                c3 = c
                el1 = e[l + 1]
                s = 0.0
                s2 = 0.0
                i = mm - 1
                while i >= l:
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = _norm2(p, e[i])
                    e[i + 1] = s * r
                    inv = 1.0 / r
                    s = e[i] * inv
                    c = p * inv
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    for k in range(m):
                        xa = x[i * m + k]
                        xb = x[(i + 1) * m + k]
                        x[(i + 1) * m + k] = s * xa + c * xb
                        x[i * m + k] = c * xa - s * xb
                    i -= 1
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if fabs(e[l]) <= eps * tst1:
                    break
        d[l] = d[l] + f
        e[l] = 0.0
    return 0


def tridiag_traces(
    const double[:, ::1] diag,
    const double[:, ::1] off_re,
    const double[:, ::1] off_im,
    const double[:, ::1] b_re,
    const double[:, ::1] b_im,
    const int[::1] group,
    int n_groups,
    const double[::1] coef_re,
    const double[::1] coef_im,
):
    cdef Py_ssize_t n_pts = diag.shape[0]
    cdef Py_ssize_t d = diag.shape[1]
    cdef Py_ssize_t support = b_re.shape[0]
    cdef Py_ssize_t n_cols = b_re.shape[1]
    cdef Py_ssize_t n_coef = coef_re.shape[0]
    cdef Py_ssize_t i, j, k, r, g, t
    cdef double a, tr, ti, pr, pi, sr, si, e, acc_re, acc_im, lam
    cdef Py_ssize_t failed = -1
    if d < 2:
        raise ValueError("tridiagonal kernel needs dim >= 2")
    if off_re.shape[0] != n_pts or off_re.shape[1] != d - 1:
        raise ValueError("off-diagonal shape mismatch")
    if support > d or b_im.shape[0] != support or b_im.shape[1] != n_cols:
        raise ValueError("state factor shape mismatch")
    if group.shape[0] != n_cols:
        raise ValueError("group length must equal factor columns")
    for r in range(n_cols):
        if group[r] < 0 or group[r] >= n_groups:
            raise ValueError("group index out of range")

    out_re_arr = np.zeros((n_pts, n_groups, n_coef))
    out_im_arr = np.zeros((n_pts, n_groups, n_coef))
    cdef double[:, :, ::1] out_re = out_re_arr
    cdef double[:, :, ::1] out_im = out_im_arr

    cdef Py_ssize_t m2 = 2 * n_cols
    cdef double[::1] dd = np.empty(d)
    cdef double[::1] ee = np.empty(d)
    cdef double[:, ::1] x = np.empty((d, max(m2, 1)))
    cdef double[::1] ph_re = np.empty(d)
    cdef double[::1] ph_im = np.empty(d)
    cdef double[:, ::1] w = np.empty((n_groups, d))
    cdef int info = 0

    with nogil:
        for i in range(n_pts):
            ph_re[0] = 1.0
            ph_im[0] = 0.0
            for j in range(d - 1):
                tr = off_re[i, j]
                ti = off_im[i, j]
                a = hypot(tr, ti)
                ee[j] = a
                dd[j] = diag[i, j]
                if a > 0.0:
                    # phase[j+1] = phase[j] * conj(t) / |t|
                    pr = ph_re[j]
                    pi = ph_im[j]
                    ph_re[j + 1] = (pr * tr + pi * ti) / a
                    ph_im[j + 1] = (pi * tr - pr * ti) / a
                else:
                    ph_re[j + 1] = 1.0
                    ph_im[j + 1] = 0.0
            dd[d - 1] = diag[i, d - 1]

            ee[d - 1] = 0.0

            # x rows: Re and Im of conj(phase) * B, zero beyond the support
            for j in range(d):
                for r in range(n_cols):
                    if j < support:
                        pr = ph_re[j]
                        pi = ph_im[j]
                        x[j, r] = pr * b_re[j, r] + pi * b_im[j, r]
                        x[j, n_cols + r] = pr * b_im[j, r] - pi * b_re[j, r]
                    else:
                        x[j, r] = 0.0
                        x[j, n_cols + r] = 0.0

            info = _ql_project(d, &dd[0], &ee[0], &x[0, 0], m2)
            if info != 0:
                failed = i
                break

            for g in range(n_groups):
                for k in range(d):
                    w[g, k] = 0.0
            for k in range(d):
                for r in range(n_cols):
                    sr = x[k, r]
                    si = x[k, n_cols + r]
                    w[group[r], k] += sr * sr + si * si

            for t in range(n_coef):
                for g in range(n_groups):
                    acc_re = 0.0
                    acc_im = 0.0
                    for k in range(d):
                        lam = dd[k]
                        e = exp(coef_re[t] * lam) * w[g, k]
                        if coef_im[t] == 0.0:
                            acc_re = acc_re + e
                        else:
                            acc_re = acc_re + e * cos(coef_im[t] * lam)
                            acc_im = acc_im + e * sin(coef_im[t] * lam)
                    out_re[i, g, t] = acc_re
                    out_im[i, g, t] = acc_im

    if failed >= 0:
        raise ArithmeticError(f"QL iteration did not converge at batch index {failed}")
    return out_re_arr, out_im_arr
