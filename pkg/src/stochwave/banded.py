"""Symmetric banded and cyclic linear algebra on column blocks.

Everything here takes vectors of shape ``(n,)`` or blocks ``(n, m)`` whose
columns are independent right-hand sides.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import kernels


def _as_block(x):
    x = np.asarray(x, dtype=float)
    return (x[:, None], True) if x.ndim == 1 else (x, False)


def _restore(y, squeeze):
    return y[:, 0] if squeeze else y


def half_bandwidth(mat) -> int:
    coo = sp.coo_matrix(mat)
    if coo.nnz == 0:
        return 0
    return int(np.max(np.abs(coo.row - coo.col)))


def to_upper_band(mat, u: int | None = None) -> np.ndarray:
    """LAPACK upper storage ``ab[u + i - j, j] = A[i, j]`` of a symmetric matrix."""
    csr = sp.csr_matrix(mat)
    n = csr.shape[0]
    if u is None:
        u = half_bandwidth(csr)
    ab = np.zeros((u + 1, n))
    for d in range(u + 1):
        ab[u - d, d:] = csr.diagonal(d)
    return ab


class SymBandedMatrix:
    """Symmetric matrix kept in upper band storage."""

    def __init__(self, mat):
        self.shape = mat.shape
        self.ab = to_upper_band(mat)

    def matvec(self, x):
        x, squeeze = _as_block(x)
        return _restore(kernels.sym_band_matvec(self.ab, x), squeeze)


class BandedCholesky:
    """Cholesky factorization of a symmetric positive definite banded matrix."""

    def __init__(self, mat):
        self.shape = mat.shape
        self.factor = kernels.band_cholesky(to_upper_band(mat))

    def solve(self, b):
        b, squeeze = _as_block(b)
        return _restore(kernels.band_cho_solve(self.factor, b), squeeze)


class CyclicSolver:
    """SPD solve for a banded matrix plus symmetric corner entries.

    The corners ``A[0, n-1] = A[n-1, 0] = s`` are removed as a rank-one
    update ``s * v v^T`` with ``v = e_0 + e_{n-1}`` and restored with the
    Sherman-Morrison formula.
    """

    def __init__(self, mat):
        csr = sp.csr_matrix(mat, dtype=float)
        n = csr.shape[0]
        self.shape = csr.shape
        self.s = float(csr[0, n - 1])
        v = np.zeros(n)
        v[0] = v[-1] = 1.0
        core = sp.lil_matrix(csr)
        core[0, n - 1] = 0.0
        core[n - 1, 0] = 0.0
        core[0, 0] -= self.s
        core[n - 1, n - 1] -= self.s
        self._inner = BandedCholesky(sp.csr_matrix(core))
        self._v = v
        self._z = self._inner.solve(v)
        self._denom = 1.0 + self.s * (v @ self._z)

    def solve(self, b):
        b, squeeze = _as_block(b)
        y = self._inner.solve(b)
        corr = (self.s / self._denom) * (self._v @ y)
        return _restore(y - self._z[:, None] * corr[None, :], squeeze)


class DenseSymmetric:
    """Dense fallback for symmetric operators without usable band structure."""

    def __init__(self, mat):
        self.shape = mat.shape
        self.mat = np.asarray(sp.csr_matrix(mat).toarray())

    def matvec(self, x):
        x, squeeze = _as_block(x)
        # per column, so results do not depend on how many columns are passed
        out = np.empty_like(x)
        for j in range(x.shape[1]):
            out[:, j] = self.mat @ x[:, j]
        return _restore(out, squeeze)


class DenseCholesky:
    def __init__(self, mat):
        self.shape = mat.shape
        dense = sp.csr_matrix(mat).toarray()
        self.factor = scipy.linalg.cho_factor(dense, lower=False, check_finite=False)

    def solve(self, b):
        b, squeeze = _as_block(b)
        out = np.empty_like(b)
        for j in range(b.shape[1]):
            out[:, j] = scipy.linalg.cho_solve(self.factor, b[:, j], check_finite=False)
        return _restore(out, squeeze)


def symmetric_operator(mat, periodic: bool):
    """Matrix-vector product object for a symmetric sparse matrix."""
    return DenseSymmetric(mat) if periodic else SymBandedMatrix(mat)


def spd_solver(mat, periodic: bool):
    """Factorized solver for a symmetric positive definite sparse matrix.

    Periodic operators built from cyclic-tridiagonal stencils are only
    banded up to their corners; tridiagonal ones go through
    :class:`CyclicSolver`, wider ones through a dense factorization.
    """
    if not periodic:
        return BandedCholesky(mat)
    coo = sp.coo_matrix(mat)
    n = coo.shape[0]
    offset = np.abs(coo.row - coo.col)
    if n > 3 and np.all((offset <= 1) | (offset == n - 1)):
        return CyclicSolver(coo)
    return DenseCholesky(coo)
