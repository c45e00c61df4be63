"""numpy/scipy implementations of the hot kernels (fallback backend).

Signatures and storage conventions match ``_ckernels.pyx``.
"""

import numpy as np
import scipy.linalg


def sym_band_matvec(ab, x):
    u = ab.shape[0] - 1
    n = ab.shape[1]
    out = ab[u][:, None] * x
    for d in range(1, u + 1):
        # superdiagonal d sits in row u - d, columns d..n-1
        diag = ab[u - d, d:][:, None]
        out[:n - d] += diag * x[d:]
        out[d:] += diag * x[:n - d]
    return out


def band_cholesky(ab):
    return scipy.linalg.cholesky_banded(ab, lower=False, check_finite=False)


def band_cho_solve(rb, b):
    return scipy.linalg.cho_solve_banded((rb, False), b, check_finite=False)


def _sinc_half(d):
    z = 0.5 * d
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z * z / 6.0, np.sin(safe) / safe)


def discrete_gradient(kind, a, b):
    if kind == 0:
        return np.zeros_like(a)
    if kind == 1:
        return np.sin(0.5 * (a + b)) * _sinc_half(a - b)
    return 0.25 * (a + b) * (a * a + b * b)


def column_sum(x):
    out = np.zeros(x.shape[1])
    for row in x:
        out += row
    return out


def matmul(a, x):
    out = np.zeros((a.shape[0], x.shape[1]))
    for j in range(a.shape[1]):
        out += a[:, j, None] * x[j]
    return out
