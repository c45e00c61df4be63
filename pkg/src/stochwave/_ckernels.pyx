# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: symmetric banded algebra and discrete gradients.

All routines act column-wise on ``(n, m)`` blocks, one column per sample
path, and never mix columns, so a path's result does not depend on which
other paths share its block.

Banded matrices use LAPACK upper storage: ``ab[u + i - j, j] = A[i, j]``.
"""

import numpy as np
from libc.math cimport sqrt, sin, fabs


def sym_band_matvec(const double[:, ::1] ab, const double[:, ::1] x):
    cdef Py_ssize_t u = ab.shape[0] - 1
    cdef Py_ssize_t n = ab.shape[1]
    cdef Py_ssize_t m = x.shape[1]
    cdef Py_ssize_t i, j, c, i0
    cdef double a
    out_arr = np.zeros((n, m))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for j in range(n):
            a = ab[u, j]
            for c in range(m):
                out[j, c] += a * x[j, c]
            i0 = j - u if j > u else 0
            for i in range(i0, j):
                a = ab[u + i - j, j]
                if a == 0.0:
                    continue
                for c in range(m):
                    out[i, c] += a * x[j, c]
                    out[j, c] += a * x[i, c]
    return out_arr


def band_cholesky(const double[:, ::1] ab):
    """Upper factor ``R`` (same storage) with ``A = R^T R``."""
    cdef Py_ssize_t u = ab.shape[0] - 1
    cdef Py_ssize_t n = ab.shape[1]
    cdef Py_ssize_t i, j, k, i0, k0
    cdef double s
    cdef int failed = -1
    rb_arr = np.zeros((u + 1, n))
    cdef double[:, ::1] rb = rb_arr
    with nogil:
        for j in range(n):
            i0 = j - u if j > u else 0
            for i in range(i0, j):
                s = ab[u + i - j, j]
                k0 = i - u if i > u else 0
                if k0 < i0:
                    k0 = i0
                for k in range(k0, i):
                    s -= rb[u + k - i, i] * rb[u + k - j, j]
                rb[u + i - j, j] = s / rb[u, i]
            s = ab[u, j]
            for k in range(i0, j):
                s -= rb[u + k - j, j] * rb[u + k - j, j]
            if s <= 0.0:
                failed = <int>j
                break
            rb[u, j] = sqrt(s)
    if failed >= 0:
        raise np.linalg.LinAlgError(f"banded matrix not positive definite (pivot {failed})")
    return rb_arr


def band_cho_solve(const double[:, ::1] rb, const double[:, ::1] b):
    cdef Py_ssize_t u = rb.shape[0] - 1
    cdef Py_ssize_t n = rb.shape[1]
    cdef Py_ssize_t m = b.shape[1]
    cdef Py_ssize_t i, j, k, c, k0, j1
    cdef double r, d
    x_arr = np.array(b, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] x = x_arr
    with nogil:
        # R^T y = b
        for j in range(n):
            k0 = j - u if j > u else 0
            for k in range(k0, j):
                r = rb[u + k - j, j]
                for c in range(m):
                    x[j, c] -= r * x[k, c]
            d = 1.0 / rb[u, j]
            for c in range(m):
                x[j, c] *= d
        # R x = y
        for i in range(n - 1, -1, -1):
            j1 = i + u if i + u < n - 1 else n - 1
            for j in range(i + 1, j1 + 1):
                r = rb[u + i - j, j]
                for c in range(m):
                    x[i, c] -= r * x[j, c]
            d = 1.0 / rb[u, i]
            for c in range(m):
                x[i, c] *= d
    return x_arr


cdef inline double _sinc_half(double d) nogil:
    # sin(d/2) / (d/2) with a series branch near zero
    cdef double z = 0.5 * d
    if fabs(z) < 1e-4:
        return 1.0 - z * z / 6.0
    return sin(z) / z


def discrete_gradient(int kind, const double[:, ::1] a, const double[:, ::1] b):
    """Closed-form difference quotients ``(F(a) - F(b)) / (a - b)``.

    ``kind`` 0: F = 0; 1: F = 1 - cos u; 2: F = u**4 / 4.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = a.shape[1]
    cdef Py_ssize_t i, c
    cdef double x, y
    out_arr = np.zeros((n, m))
    cdef double[:, ::1] out = out_arr
    if kind == 0:
        return out_arr
    with nogil:
        for i in range(n):
            for c in range(m):
                x = a[i, c]
                y = b[i, c]
                if kind == 1:
                    out[i, c] = sin(0.5 * (x + y)) * _sinc_half(x - y)
                else:
                    out[i, c] = 0.25 * (x + y) * (x * x + y * y)
    return out_arr


def column_sum(const double[:, ::1] x):
    """Column sums accumulated row by row, in the same order for any block width."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = x.shape[1]
    cdef Py_ssize_t i, c
    out_arr = np.zeros(m)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            for c in range(m):
                out[c] += x[i, c]
    return out_arr


def matmul(const double[:, ::1] a, const double[:, ::1] x):
    """``a @ x`` with each entry summed sequentially over the inner index."""
    cdef Py_ssize_t p = a.shape[0]
    cdef Py_ssize_t k = a.shape[1]
    cdef Py_ssize_t m = x.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double s
    out_arr = np.zeros((p, m))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(p):
            for j in range(k):
                s = a[i, j]
                for c in range(m):
                    out[i, c] += s * x[j, c]
    return out_arr
