# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: SCM accumulation and per-bin loaded-Cholesky MVDR solve.

Mirrors ``_kernels_py``; the two are cross-checked in the test suite.
"""
import numpy as np

from libc.math cimport sqrt, isnan, isinf

ctypedef double complex cplx


cdef inline cplx _conj(cplx z) noexcept nogil:
    return z.real - 1j * z.imag


cdef inline double _abs2(cplx z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline bint _finite(cplx z) noexcept nogil:
    return not (isnan(z.real) or isnan(z.imag) or isinf(z.real) or isinf(z.imag))


cdef void _finish(cplx[:, :, ::1] phi, Py_ssize_t f, Py_ssize_t n_ch, double scale) noexcept nogil:
    cdef Py_ssize_t c, d
    for c in range(n_ch):
        phi[f, c, c] = phi[f, c, c].real * scale
        for d in range(c + 1, n_ch):
            phi[f, c, d] = phi[f, c, d] * scale
            phi[f, d, c] = _conj(phi[f, c, d])


def scm(spec):
    """(1/T) sum_t x x^H per bin for a (T, F, C) array -> (F, C, C)."""
    cdef const cplx[:, :, ::1] x = np.ascontiguousarray(spec, dtype=np.complex128)
    cdef Py_ssize_t n_t = x.shape[0], n_f = x.shape[1], n_ch = x.shape[2]
    out = np.zeros((n_f, n_ch, n_ch), dtype=np.complex128)
    cdef cplx[:, :, ::1] phi = out
    cdef Py_ssize_t f, t, c, d
    cdef cplx xc
    cdef double scale = 1.0 / n_t
    with nogil:
        for f in range(n_f):
            for t in range(n_t):
                for c in range(n_ch):
                    xc = x[t, f, c]
                    for d in range(c, n_ch):
                        phi[f, c, d] = phi[f, c, d] + xc * _conj(x[t, f, d])
            _finish(phi, f, n_ch, scale)
    return out


def scm_pair(mixture, xhat):
    """Target SCM of ``xhat`` and noise SCM of ``mixture - xhat`` in one pass."""
    cdef const cplx[:, :, ::1] y = np.ascontiguousarray(mixture, dtype=np.complex128)
    cdef const cplx[:, :, ::1] x = np.ascontiguousarray(xhat, dtype=np.complex128)
    if y.shape[0] != x.shape[0] or y.shape[1] != x.shape[1] or y.shape[2] != x.shape[2]:
        raise ValueError("scm_pair: shape mismatch")
    cdef Py_ssize_t n_t = x.shape[0], n_f = x.shape[1], n_ch = x.shape[2]
    out_x = np.zeros((n_f, n_ch, n_ch), dtype=np.complex128)
    out_n = np.zeros((n_f, n_ch, n_ch), dtype=np.complex128)
    noise_buf = np.empty(n_ch, dtype=np.complex128)
    cdef cplx[:, :, ::1] phx = out_x
    cdef cplx[:, :, ::1] phn = out_n
    cdef cplx[::1] nv = noise_buf
    cdef Py_ssize_t f, t, c, d
    cdef cplx xc, nc
    cdef double scale = 1.0 / n_t
    with nogil:
        for f in range(n_f):
            for t in range(n_t):
                for c in range(n_ch):
                    nv[c] = y[t, f, c] - x[t, f, c]
                for c in range(n_ch):
                    xc = x[t, f, c]
                    nc = nv[c]
                    for d in range(c, n_ch):
                        phx[f, c, d] = phx[f, c, d] + xc * _conj(x[t, f, d])
                        phn[f, c, d] = phn[f, c, d] + nc * _conj(nv[d])
            _finish(phx, f, n_ch, scale)
            _finish(phn, f, n_ch, scale)
    return out_x, out_n


cdef bint _solve_bin(
    const cplx[:, :, ::1] pxx,
    const cplx[:, :, ::1] pnn,
    Py_ssize_t f,
    Py_ssize_t n_ch,
    Py_ssize_t ref,
    double loading,
    cplx[:, ::1] chol,
    cplx[:, ::1] work,
    cplx[::1] w_out,
) noexcept nogil:
    cdef Py_ssize_t i, j, k, col
    cdef double eps = 0.0, s
    cdef cplx acc, tr
    for i in range(n_ch):
        eps += pnn[f, i, i].real
    eps = loading * eps / n_ch

    # Lower Cholesky factor of (pnn + eps I).
    for j in range(n_ch):
        s = pnn[f, j, j].real + eps
        for k in range(j):
            s -= _abs2(chol[j, k])
        if not (s > 0.0):
            return False
        chol[j, j] = sqrt(s)
        for i in range(j + 1, n_ch):
            acc = pnn[f, i, j]
            for k in range(j):
                acc = acc - chol[i, k] * _conj(chol[j, k])
            chol[i, j] = acc / chol[j, j].real

    # work <- L^-H L^-1 pxx, column by column.
    for col in range(n_ch):
        for i in range(n_ch):
            acc = pxx[f, i, col]
            for k in range(i):
                acc = acc - chol[i, k] * work[k, col]
            work[i, col] = acc / chol[i, i].real
        for i in range(n_ch - 1, -1, -1):
            acc = work[i, col]
            for k in range(i + 1, n_ch):
                acc = acc - _conj(chol[k, i]) * work[k, col]
            work[i, col] = acc / chol[i, i].real

    tr = 0.0
    for i in range(n_ch):
        tr = tr + work[i, i]
    if not _finite(tr) or sqrt(_abs2(tr)) < 1e-12 * n_ch:
        return False
    for i in range(n_ch):
        w_out[i] = work[i, ref] / tr
        if not _finite(w_out[i]):
            return False
    return True


def mvdr_solve(phi_xx, phi_nn, Py_ssize_t ref, double loading):
    """Trace-normalized MVDR weights (F, C) with pass-through fallback."""
    cdef const cplx[:, :, ::1] pxx = np.ascontiguousarray(phi_xx, dtype=np.complex128)
    cdef const cplx[:, :, ::1] pnn = np.ascontiguousarray(phi_nn, dtype=np.complex128)
    cdef Py_ssize_t n_f = pnn.shape[0], n_ch = pnn.shape[1]
    out = np.zeros((n_f, n_ch), dtype=np.complex128)
    cdef cplx[:, ::1] w = out
    cdef cplx[:, ::1] chol = np.zeros((n_ch, n_ch), dtype=np.complex128)
    cdef cplx[:, ::1] work = np.zeros((n_ch, n_ch), dtype=np.complex128)
    cdef cplx[::1] wbin = np.zeros(n_ch, dtype=np.complex128)
    cdef Py_ssize_t f, i
    with nogil:
        for f in range(n_f):
            if _solve_bin(pxx, pnn, f, n_ch, ref, loading, chol, work, wbin):
                for i in range(n_ch):
                    w[f, i] = wbin[i]
            else:
                w[f, ref] = 1.0
    return out
