"""Uniform 1-D meshes shared by the finite difference and DG discretizations."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Raised for invalid user-supplied parameters or scenario files."""


class Boundary(str, enum.Enum):
    DIRICHLET = "dirichlet"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class Grid:
    """Uniform partition ``x_i = a + i*h`` of ``[a, b]`` into ``M`` cells.

    Degrees of freedom live on the interior nodes ``x_1 .. x_{M-1}`` for
    Dirichlet conditions and on ``x_1 .. x_M`` (``x_M`` identified with
    ``x_0``) for periodic ones.
    """

    a: float
    b: float
    M: int
    boundary: Boundary
    nodes: np.ndarray = field(repr=False, compare=False)

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.M

    @property
    def dof(self) -> int:
        return self.M - 1 if self.boundary is Boundary.DIRICHLET else self.M

    @property
    def dof_nodes(self) -> np.ndarray:
        if self.boundary is Boundary.DIRICHLET:
            return self.nodes[1:-1]
        return self.nodes[1:]

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC


def make_uniform_grid(a: float, b: float, M: int, boundary="dirichlet") -> Grid:
    """Build a uniform grid, validating the mesh parameters.

    Examples
    --------
    >>> g = make_uniform_grid(0.0, 1.0, 10, "dirichlet")
    >>> g.h, g.dof
    (0.1, 9)
    """
    boundary = Boundary(boundary)
    if int(M) != M or M < 2:
        raise ConfigurationError(f"cell count M must be an integer >= 2, got {M!r}")
    if not b > a:
        raise ConfigurationError(f"interval must satisfy b > a, got a={a!r}, b={b!r}")
    M = int(M)
    a = float(a)
    b = float(b)
    h = (b - a) / M
    nodes = a + np.arange(M + 1) * h
    nodes[-1] = b
    nodes.setflags(write=False)
    return Grid(a=a, b=b, M=M, boundary=boundary, nodes=nodes)
