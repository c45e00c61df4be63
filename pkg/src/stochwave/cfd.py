"""Fourth-order compact finite difference Laplacian ``A^-1 D``.

``D`` is the standard three-point second difference and ``A = I + h^2/12 D``
the compact averaging stencil ``(1, 10, 1) / 12``. ``A^-1 D`` is never formed;
every application is a second difference followed by a tridiagonal solve
(cyclic-tridiagonal for periodic grids).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import kernels
from .banded import spd_solver
from .domain import ConfigurationError, Grid
from .spatial import SpatialDiscretization


def _cyclic_tridiag(n, lower_upper, diag, periodic):
    mat = sp.diags([lower_upper, diag, lower_upper], [-1, 0, 1], shape=(n, n), format="lil")
    if periodic:
        mat[0, n - 1] += lower_upper
        mat[n - 1, 0] += lower_upper
    return sp.csr_matrix(mat)


class CfdOperator(SpatialDiscretization):
    """Compact finite difference operator on the degree-of-freedom nodes of ``grid``."""

    def __init__(self, grid: Grid):
        if grid.periodic and grid.M < 4:
            raise ConfigurationError("periodic compact differences need M >= 4")
        self.grid = grid
        self.h = grid.h
        self.weight = grid.h
        n = grid.dof
        self.D = _cyclic_tridiag(n, 1.0 / self.h ** 2, -2.0 / self.h ** 2, grid.periodic)
        self.A = _cyclic_tridiag(n, 1.0 / 12.0, 10.0 / 12.0, grid.periodic)
        self._averaging = spd_solver(self.A, grid.periodic)
        self._shifted = {}

    @property
    def dof(self) -> int:
        return self.grid.dof

    def pencil(self):
        return self.A, self.D

    def _check(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.dof:
            raise ValueError(f"expected {self.dof} degrees of freedom, got {u.shape[0]}")
        return u

    def apply_second_difference(self, u):
        u = self._check(u)
        out = -2.0 * u
        if self.grid.periodic:
            out += np.roll(u, 1, axis=0) + np.roll(u, -1, axis=0)
        else:
            out[1:] += u[:-1]
            out[:-1] += u[1:]
        return out / self.h ** 2

    def apply_averaging(self, u):
        u = self._check(u)
        out = 10.0 * u
        if self.grid.periodic:
            out += np.roll(u, 1, axis=0) + np.roll(u, -1, axis=0)
        else:
            out[1:] += u[:-1]
            out[:-1] += u[1:]
        return out / 12.0

    def solve_averaging(self, rhs):
        return self._averaging.solve(self._check(rhs))

    def compact_laplacian(self, u):
        return self.solve_averaging(self.apply_second_difference(u))

    laplacian = compact_laplacian

    def solve_shifted(self, c: float, rhs):
        """Solve ``(I - c A^-1 D) w = rhs`` through the banded system ``(A - c D) w = A rhs``."""
        if c < 0:
            raise ValueError(f"shift must be non-negative, got {c}")
        rhs = self._check(rhs)
        if c == 0:
            return np.array(rhs, dtype=float)
        solver = self._shifted.get(c)
        if solver is None:
            solver = spd_solver(self.A - c * self.D, self.grid.periodic)
            self._shifted[c] = solver
        return solver.solve(self.apply_averaging(rhs))

    @property
    def collocation_points(self):
        return self.grid.dof_nodes

    def nodal(self, u):
        return u

    def to_dof(self, values):
        return values

    def integrate(self, values):
        return self.h * kernels.column_sum(values)

    def interpolate(self, fn):
        return np.asarray(fn(self.grid.dof_nodes), dtype=float) * np.ones(self.dof)

    def noise_trace(self, gvals, model):
        basis = self.noise_basis(model)
        weights = np.sum(basis ** 2, axis=1)
        g2 = np.asarray(gvals, dtype=float) ** 2
        if g2.ndim == 2:
            weights = weights[:, None]
        return self.h * kernels.column_sum(g2 * weights)
