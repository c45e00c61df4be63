"""Registered drift nonlinearities ``f = F'`` and diffusion coefficients ``g``.

Potentials are normalised so that ``F(0) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .domain import ConfigurationError

GUARD = 1e-12


def discrete_gradient(ftilde, f, u_new, u_old, eps: float = GUARD):
    """Componentwise difference quotient ``(F(u_new) - F(u_old)) / (u_new - u_old)``.

    Entries whose increment is at most ``eps * (1 + |u_old|)`` fall back to
    ``f`` at the midpoint.
    """
    u_new = np.asarray(u_new, dtype=float)
    u_old = np.asarray(u_old, dtype=float)
    du = u_new - u_old
    small = np.abs(du) <= eps * (1.0 + np.abs(u_old))
    safe = np.where(small, 1.0, du)
    quotient = (ftilde(u_new) - ftilde(u_old)) / safe
    return np.where(small, f(0.5 * (u_new + u_old)), quotient)


@dataclass(frozen=True)
class Nonlinearity:
    """Drift ``f`` with potential ``F``; ``kind`` selects a closed-form kernel."""

    name: str
    f: Callable
    potential: Callable
    kind: int | None = None

    @property
    def is_zero(self) -> bool:
        return self.kind == 0

    def gradient(self, u_new, u_old, eps: float = GUARD):
        if self.kind is None:
            return discrete_gradient(self.potential, self.f, u_new, u_old, eps)
        u_new = np.asarray(u_new, dtype=float)
        if u_new.ndim == 1:
            return kernels.discrete_gradient(self.kind, u_new[:, None],
                                              np.asarray(u_old, dtype=float)[:, None])[:, 0]
        return kernels.discrete_gradient(self.kind, u_new, u_old)


@dataclass(frozen=True)
class Diffusion:
    """Diffusion coefficient ``g``; ``constant`` is set for additive noise."""

    name: str
    g: Callable
    constant: float | None = None

    @property
    def is_zero(self) -> bool:
        return self.constant == 0.0

    def __call__(self, u):
        return self.g(u)


def _zero(u):
    return np.zeros_like(np.asarray(u, dtype=float))


def _one(u):
    return np.ones_like(np.asarray(u, dtype=float))


NONLINEARITIES = {
    "zero": Nonlinearity("zero", _zero, _zero, kind=0),
    "sin": Nonlinearity("sin", np.sin, lambda u: 1.0 - np.cos(u), kind=1),
    "cubic": Nonlinearity("cubic", lambda u: u ** 3, lambda u: 0.25 * u ** 4, kind=2),
}

DIFFUSIONS = {
    "zero": Diffusion("zero", _zero, constant=0.0),
    "one": Diffusion("one", _one, constant=1.0),
    "sin": Diffusion("sin", np.sin),
    "identity": Diffusion("identity", lambda u: np.array(u, dtype=float)),
}


def get_nonlinearity(name) -> Nonlinearity:
    if isinstance(name, Nonlinearity):
        return name
    try:
        return NONLINEARITIES[name]
    except KeyError:
        raise ConfigurationError(f"unknown nonlinearity {name!r}; choose from {sorted(NONLINEARITIES)}") from None


def get_diffusion(name) -> Diffusion:
    if isinstance(name, Diffusion):
        return name
    try:
        return DIFFUSIONS[name]
    except KeyError:
        raise ConfigurationError(f"unknown diffusion {name!r}; choose from {sorted(DIFFUSIONS)}") from None
