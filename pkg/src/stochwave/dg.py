"""Symmetric interior penalty DG space on a uniform Dirichlet mesh.

Each cell carries Legendre polynomials orthonormal on the reference cell
``[-1, 1]``, so the physical mass matrix is ``h/2`` times the identity. The
discrete Laplacian is ``Delta_h = mass^-1 S`` with ``S[i, j] = B_h(phi_j, phi_i)``.

Degrees of freedom are ordered cell by cell: ``index = cell * (k + 1) + j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from numpy.polynomial import legendre

from . import kernels
from .domain import ConfigurationError, Grid
from .spatial import SpatialDiscretization

MAX_DEGREE = 3
EIGEN_CHECK_LIMIT = 2000


def default_penalty(degree: int) -> float:
    return 10.0 * (degree + 1) ** 2


def _reference_basis(degree, xi):
    """Values and reference derivatives of the orthonormal Legendre family at ``xi``."""
    xi = np.asarray(xi, dtype=float)
    vals = np.empty((degree + 1, xi.size))
    ders = np.empty((degree + 1, xi.size))
    for j in range(degree + 1):
        c = np.zeros(j + 1)
        c[j] = np.sqrt((2 * j + 1) / 2.0)
        vals[j] = legendre.legval(xi, c)
        ders[j] = legendre.legval(xi, legendre.legder(c))
    return vals, ders


class DgSpace(SpatialDiscretization):
    """Piecewise polynomials of degree ``degree`` with the SIPG Laplacian.

    Parameters
    ----------
    grid : Grid
        Dirichlet mesh; the periodic variant is not supported.
    degree : int
        Polynomial degree ``k`` (1 to 3).
    sigma : float, optional
        Penalty parameter; defaults to ``10 (k+1)^2``.
    n_quad : int, optional
        Gauss points per cell, at least ``k + 1``; defaults to ``k + 2``.
    check : bool
        Verify at assembly that the discrete Laplacian is negative definite.
    """

    def __init__(self, grid: Grid, degree: int = 1, sigma: float | None = None,
                 n_quad: int | None = None, check: bool = True):
        if grid.periodic:
            raise ConfigurationError("the DG space supports Dirichlet boundaries only")
        if not 1 <= degree <= MAX_DEGREE:
            raise ConfigurationError(f"DG degree must be in 1..{MAX_DEGREE}, got {degree}")
        sigma = default_penalty(degree) if sigma is None else float(sigma)
        if sigma <= 0:
            raise ConfigurationError(f"penalty sigma must be positive, got {sigma}")
        n_quad = degree + 2 if n_quad is None else int(n_quad)
        if n_quad < degree + 1:
            raise ConfigurationError(f"need at least {degree + 1} Gauss points, got {n_quad}")

        self.grid = grid
        self.degree = degree
        self.sigma = sigma
        self.h = grid.h
        self.weight = grid.h / 2.0
        self.nb = degree + 1
        self.n_cells = grid.M

        self.xi, self.wq = legendre.leggauss(n_quad)
        self.phi, self.dphi = _reference_basis(degree, self.xi)
        self.phi_w = self.phi * self.wq[None, :]
        ends, dends = _reference_basis(degree, np.array([-1.0, 1.0]))
        self.trace_left, self.trace_right = ends[:, 0], ends[:, 1]
        self.dtrace_left, self.dtrace_right = dends[:, 0], dends[:, 1]

        centers = grid.a + (np.arange(self.n_cells) + 0.5) * self.h
        self.quad_points = (centers[:, None] + 0.5 * self.h * self.xi[None, :]).ravel()

        self.mass = sp.identity(self.dof, format="csr") * self.weight
        self.stiff = self._assemble()
        self.lap = sp.csr_matrix(self.stiff / self.weight)
        if check and self.dof <= EIGEN_CHECK_LIMIT:
            top = scipy.linalg.eigvalsh(self.stiff.toarray(), subset_by_index=[self.dof - 1, self.dof - 1])[0]
            if top >= 0:
                raise ConfigurationError(
                    f"penalty sigma={sigma} does not make the DG Laplacian negative definite"
                    f" (largest eigenvalue {top:.3e}); increase sigma")

    @property
    def dof(self) -> int:
        return self.n_cells * self.nb

    # -- assembly ---------------------------------------------------------

    def trace_rows(self):
        """Node functionals ``(J, G)``: jump of value and average of derivative at nodes 0..M."""
        M, nb = self.n_cells, self.nb
        scale = 2.0 / self.h
        J = sp.lil_matrix((M + 1, self.dof))
        G = sp.lil_matrix((M + 1, self.dof))
        for i in range(M + 1):
            left, right = i - 1, i
            interior = 0 < i < M
            half = 0.5 if interior else 1.0
            if left >= 0:
                cols = slice(left * nb, left * nb + nb)
                J[i, cols] = self.trace_right
                G[i, cols] = half * scale * self.dtrace_right
            if right < M:
                cols = slice(right * nb, right * nb + nb)
                J[i, cols] = -self.trace_left
                G[i, cols] = half * scale * self.dtrace_left
        return sp.csr_matrix(J), sp.csr_matrix(G)

    def _assemble(self):
        scale = 2.0 / self.h
        kref = (self.dphi * self.wq[None, :]) @ self.dphi.T
        volume = sp.block_diag([scale * kref] * self.n_cells, format="csr")
        J, G = self.trace_rows()
        S = -volume + J.T @ G + G.T @ J - (self.sigma / self.h) * (J.T @ J)
        S = 0.5 * (S + S.T)
        return sp.csr_matrix(S)

    # -- spatial interface ------------------------------------------------

    def pencil(self):
        return sp.identity(self.dof, format="csr"), self.lap

    def laplacian(self, u):
        return self.lap @ np.asarray(u, dtype=float)

    @property
    def collocation_points(self):
        return self.quad_points

    def _cells(self, u):
        u = np.asarray(u, dtype=float)
        return u.reshape((self.n_cells, self.nb) + u.shape[1:])

    # Contractions below loop over the short basis/quadrature axes so every
    # column is computed in the same order whatever the block width.

    def nodal(self, u):
        cells = self._cells(u)
        extra = cells.shape[2:]
        vals = np.zeros((self.n_cells, self.xi.size) + extra)
        for j in range(self.nb):
            vals += self.phi[j].reshape((1, -1) + (1,) * len(extra)) * cells[:, j:j + 1]
        return vals.reshape((self.quad_points.size,) + extra)

    def to_dof(self, values):
        values = np.asarray(values, dtype=float)
        extra = values.shape[1:]
        vals = values.reshape((self.n_cells, self.xi.size) + extra)
        coeffs = np.zeros((self.n_cells, self.nb) + extra)
        for q in range(self.xi.size):
            coeffs += self.phi_w[:, q].reshape((1, -1) + (1,) * len(extra)) * vals[:, q:q + 1]
        return coeffs.reshape((self.dof,) + extra)

    def integrate(self, values):
        values = np.asarray(values, dtype=float)
        vals = values.reshape((self.n_cells, self.xi.size) + values.shape[1:])
        per_cell = np.zeros((self.n_cells,) + values.shape[1:])
        for q in range(self.xi.size):
            per_cell += self.wq[q] * vals[:, q]
        return self.weight * kernels.column_sum(per_cell)

    def project(self, fn):
        """L2 projection of a scalar function, cell by cell with Gauss quadrature."""
        return DgFunction(self, self.to_dof(np.asarray(fn(self.quad_points), dtype=float)
                                            * np.ones(self.quad_points.size)))

    def interpolate(self, fn):
        return self.project(fn).coeffs

    def inner_product(self, u, w) -> float:
        return float(self.inner(_coeffs(u), _coeffs(w)))

    def apply(self, u):
        """``Delta_h u`` as a new DG function."""
        return DgFunction(self, self.laplacian(_coeffs(u)))

    def _noise_gram(self, model):
        cache = self.__dict__.setdefault("_gram_cache", {})
        key = id(model)
        if key not in cache:
            basis = self.noise_basis(model).reshape(self.n_cells, self.xi.size, model.P)
            cache[key] = (model, np.einsum("cqk,crk->cqr", basis, basis))
        return cache[key][1]

    def noise_trace(self, gvals, model):
        gram = self._noise_gram(model)
        g = np.asarray(gvals, dtype=float)
        squeeze = g.ndim == 1
        g = g.reshape(self.n_cells, self.xi.size, -1)
        a = self.phi_w[None, :, :, None] * g[:, None, :, :]     # (M, nb, nq, m)
        ga = np.zeros_like(a)
        for r in range(self.xi.size):
            ga += gram[:, None, :, r, None] * a[:, :, r:r + 1, :]
        out = self.weight * kernels.column_sum((a * ga).reshape(-1, a.shape[-1]))
        return out[0] if squeeze else out

    # -- function-level operations ---------------------------------------

    def function(self, coeffs=None) -> "DgFunction":
        coeffs = np.zeros(self.dof) if coeffs is None else np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.dof,):
            raise ValueError(f"expected {self.dof} coefficients, got shape {coeffs.shape}")
        return DgFunction(self, coeffs)

    def bilinear(self, u, xi) -> float:
        """Evaluate ``B_h(u, xi)`` term by term from traces and cell integrals."""
        u, xi = _same_space(self, u, xi)
        scale = 2.0 / self.h
        cu = self._cells(u.coeffs)
        cx = self._cells(xi.coeffs)
        du = scale * (cu @ self.dphi)
        dx = scale * (cx @ self.dphi)
        volume = 0.5 * self.h * np.sum((du * dx) @ self.wq)
        total = -volume
        for i in range(self.n_cells + 1):
            ju, jx = jump(u, i), jump(xi, i)
            total += average(u, i, derivative=True) * jx
            total += average(xi, i, derivative=True) * ju
            total -= (self.sigma / self.h) * ju * jx
        return float(total)


@dataclass
class DgFunction:
    space: DgSpace
    coeffs: np.ndarray

    def cell_coeffs(self, cell: int) -> np.ndarray:
        nb = self.space.nb
        return self.coeffs[cell * nb:(cell + 1) * nb]

    def trace(self, cell: int, side: str, derivative: bool = False) -> float:
        """One-sided value (or x-derivative) at the left/right end of ``cell``."""
        sp_ = self.space
        c = self.cell_coeffs(cell)
        if derivative:
            vec = sp_.dtrace_left if side == "left" else sp_.dtrace_right
            return float(c @ vec) * 2.0 / sp_.h
        vec = sp_.trace_left if side == "left" else sp_.trace_right
        return float(c @ vec)

    def __call__(self, x):
        sp_ = self.space
        x = np.atleast_1d(np.asarray(x, dtype=float))
        cell = np.clip(((x - sp_.grid.a) / sp_.h).astype(int), 0, sp_.n_cells - 1)
        xi = 2.0 * (x - sp_.grid.a - cell * sp_.h) / sp_.h - 1.0
        vals, _ = _reference_basis(sp_.degree, xi)
        cells = self.coeffs.reshape(sp_.n_cells, sp_.nb)
        return np.einsum("jp,pj->p", vals, cells[cell])


def _coeffs(u):
    return u.coeffs if isinstance(u, DgFunction) else np.asarray(u, dtype=float)


def _same_space(space, *funcs):
    out = []
    for f in funcs:
        if isinstance(f, DgFunction):
            if f.space is not space:
                raise ValueError("DG functions belong to different spaces")
            out.append(f)
        else:
            out.append(space.function(f))
    return out


def _one_sided(u: DgFunction, i: int, derivative: bool):
    M = u.space.n_cells
    if not 0 <= i <= M:
        raise IndexError(f"node index {i} outside 0..{M}")
    minus = u.trace(i - 1, "right", derivative) if i > 0 else None
    plus = u.trace(i, "left", derivative) if i < M else None
    return minus, plus


def jump(u: DgFunction, i: int, derivative: bool = False) -> float:
    """``u(x_i^-) - u(x_i^+)``, with ``-u(x_0^+)`` and ``u(x_M^-)`` at the ends."""
    minus, plus = _one_sided(u, i, derivative)
    if minus is None:
        return -plus
    if plus is None:
        return minus
    return minus - plus


def average(u: DgFunction, i: int, derivative: bool = False) -> float:
    """Mean of the one-sided traces; the single trace at the ends."""
    minus, plus = _one_sided(u, i, derivative)
    if minus is None:
        return plus
    if plus is None:
        return minus
    return 0.5 * (minus + plus)
