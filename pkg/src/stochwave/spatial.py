"""Common interface of the two spatial discretizations.

A discretization represents functions by a coefficient vector and exposes

* a commuting symmetric pencil ``(A, D)`` with discrete Laplacian ``L = A^-1 D``,
* a weighted inner product in which ``L`` is self-adjoint,
* collocation points where nonlinear coefficients are evaluated, together
  with ``nodal`` (coefficients -> point values), ``to_dof`` (point values ->
  coefficients) and ``integrate`` (quadrature of point values).

For compact finite differences the collocation points are the grid nodes and
``nodal``/``to_dof`` are identities; for DG they are Gauss points and
``to_dof`` is the discrete L2 projection.
"""

from __future__ import annotations

import numpy as np

from . import kernels


class SpatialDiscretization:
    grid = None
    weight: float = 1.0

    @property
    def dof(self) -> int:
        raise NotImplementedError

    @property
    def periodic(self) -> bool:
        return self.grid.periodic

    def pencil(self):
        """Sparse ``(A, D)`` with ``L = A^-1 D``; both symmetric and commuting."""
        raise NotImplementedError

    def laplacian(self, u):
        raise NotImplementedError

    @property
    def collocation_points(self) -> np.ndarray:
        raise NotImplementedError

    def nodal(self, u):
        raise NotImplementedError

    def to_dof(self, values):
        raise NotImplementedError

    def integrate(self, values):
        raise NotImplementedError

    def interpolate(self, fn):
        """Coefficients representing ``fn`` (nodal sampling or projection)."""
        raise NotImplementedError

    def noise_trace(self, gvals, model):
        """``sum_k q_k <to_dof(g e_k), to_dof(g e_k)>`` for each column of ``gvals``."""
        raise NotImplementedError

    def inner(self, u, w):
        """Weighted inner product, column-wise for blocks."""
        return self.weight * kernels.column_sum(np.asarray(u) * np.asarray(w))

    def norm(self, u):
        return np.sqrt(self.inner(u, u))

    def noise_basis(self, model) -> np.ndarray:
        """``e_k(x_q) sqrt(q_k)`` at the collocation points (cached per model)."""
        cache = self.__dict__.setdefault("_noise_cache", {})
        key = id(model)
        if key not in cache:
            cache[key] = (model, model.evaluate(self.collocation_points) * model.sqrt_q[None, :])
        return cache[key][1]

    def noise_vector(self, U, dbeta, g, model):
        """Coefficients of ``P(g(U) dW)`` for increments ``dbeta`` of shape ``(P, m)``."""
        field = kernels.matmul(self.noise_basis(model), dbeta)
        return self.to_dof(g(self.nodal(U)) * field)
