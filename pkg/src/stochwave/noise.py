"""Truncated Q-Wiener increments.

The covariance operator is diagonal in a sine basis; only the first ``P``
modes are retained. Increments are drawn per mode as ``sqrt(dt) * xi`` with
``xi`` a standard normal clamped to ``[-A_dt, A_dt]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import ConfigurationError, Grid

DEFAULT_TRUNCATION = 2
MAX_DEFAULT_MODES = 100


@dataclass(frozen=True)
class NoiseModel:
    """Retained eigenpairs ``(q_k, e_k)`` of the covariance operator.

    ``basis(k, x)`` evaluates ``e_k`` (``k`` starting at 1) on an array of
    points; ``q`` holds the eigenvalues in mode order.
    """

    q: np.ndarray
    basis: Callable[[np.ndarray, np.ndarray], np.ndarray]
    k_trunc: int = DEFAULT_TRUNCATION

    @property
    def P(self) -> int:
        return len(self.q)

    @property
    def sqrt_q(self) -> np.ndarray:
        return np.sqrt(self.q)

    def evaluate(self, x) -> np.ndarray:
        """Matrix of ``e_k(x_i)`` with one row per point and one column per mode."""
        x = np.asarray(x, dtype=float)
        k = np.arange(1, self.P + 1)
        return self.basis(k[None, :], x[:, None])


def sine_basis(a: float = 0.0, b: float = 1.0):
    """Orthonormal Dirichlet sine family on ``[a, b]``."""
    length = b - a
    scale = math.sqrt(2.0 / length)

    def basis(k, x):
        return scale * np.sin(k * np.pi * (x - a) / length)

    return basis


def default_spectrum(P: int, a: float = 0.0, b: float = 1.0,
                     k_trunc: int = DEFAULT_TRUNCATION) -> NoiseModel:
    """``q_k = k**-6`` with ``e_k(x) = sqrt(2) sin(k pi x)`` on the unit interval."""
    if P < 1:
        raise ConfigurationError(f"mode count P must be >= 1, got {P}")
    k = np.arange(1, P + 1, dtype=float)
    q = k ** -6.0
    q.setflags(write=False)
    return NoiseModel(q=q, basis=sine_basis(a, b), k_trunc=k_trunc)


def default_mode_count(grid: Grid) -> int:
    return max(1, min(grid.M - 1, MAX_DEFAULT_MODES))


def truncation_bound(dt: float, k_trunc: int = DEFAULT_TRUNCATION) -> float:
    """Clamp level ``sqrt(2 k |ln dt|)`` for the standard normal drivers."""
    if not 0.0 < dt < 1.0:
        raise ConfigurationError(f"truncation needs 0 < dt < 1, got dt={dt!r}")
    if k_trunc < 2:
        raise ConfigurationError(f"truncation exponent must be >= 2, got {k_trunc}")
    return math.sqrt(2.0 * k_trunc * abs(math.log(dt)))


@dataclass(frozen=True)
class IncrementBlock:
    dbeta: np.ndarray
    dt: float


def truncate_normals(xi: np.ndarray, dt: float, k_trunc: int = DEFAULT_TRUNCATION,
                     truncate: bool = True) -> np.ndarray:
    """Scale standard normals to Brownian increments, clamping if requested."""
    if truncate:
        bound = truncation_bound(dt, k_trunc)
        xi = np.clip(xi, -bound, bound)
    return math.sqrt(dt) * xi


def sample_increments(rng: np.random.Generator, dt: float, P: int,
                      k_trunc: int = DEFAULT_TRUNCATION,
                      truncate: bool = True) -> IncrementBlock:
    """Draw one step of ``P`` truncated Brownian increments from ``rng``."""
    xi = rng.standard_normal(P)
    return IncrementBlock(truncate_normals(xi, dt, k_trunc, truncate), dt)


def evaluation_matrix(grid: Grid, model: NoiseModel) -> np.ndarray:
    """``E[i, k] = e_k(x_i)`` over the degree-of-freedom nodes of ``grid``."""
    return model.evaluate(grid.dof_nodes)


def path_rng(seed: int, path: int) -> np.random.Generator:
    """Independent generator for sample path ``path`` of a seeded ensemble."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(path,)))
