"""Discrete energies and per-step energy bookkeeping.

All functions accept a single state vector or a block with one path per
column and return a scalar or one value per column accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nonlinearity import get_diffusion, get_nonlinearity


@dataclass(frozen=True)
class EnergyRecord:
    step: int
    t: float
    energy: float
    expected_increment: float
    pathwise_residual: float


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _state(state, space):
    U, V = np.asarray(state.U, dtype=float), np.asarray(state.V, dtype=float)
    if U.shape != V.shape or U.shape[0] != space.dof:
        raise ValueError(f"state shapes {U.shape}/{V.shape} do not match {space.dof} degrees of freedom")
    return U, V


def _potential(ftilde):
    if ftilde is None:
        return None
    if callable(ftilde):
        return ftilde
    return get_nonlinearity(ftilde).potential


def discrete_energy(space, U, V, ftilde=None):
    """``1/2 <V, V> - 1/2 <U, L U> + integral of F(U)`` in the space's inner product."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    out = 0.5 * space.inner(V, V) - 0.5 * space.inner(U, space.laplacian(U))
    pot = _potential(ftilde)
    if pot is not None:
        out = out + space.integrate(pot(space.nodal(U)))
    return _scalar(out)


def cfd_energy(state, cfd, ftilde=None):
    U, V = _state(state, cfd)
    return discrete_energy(cfd, U, V, ftilde)


def dg_energy(state, dgspace, ftilde=None):
    U, V = _state(state, dgspace)
    return discrete_energy(dgspace, U, V, ftilde)


def expected_step_increment(space, U, dt, model, g):
    """Conditional mean energy gain of one step: ``dt/2 * sum_k q_k |P(g(U) e_k)|^2``."""
    g = get_diffusion(g)
    U = np.asarray(U, dtype=float)
    if g.is_zero:
        return _scalar(np.zeros(U.shape[1:]))
    return _scalar(0.5 * dt * space.noise_trace(g(space.nodal(U)), model))


def expected_step_increment_cfd(state, dt, model, g, cfd):
    return expected_step_increment(cfd, _state(state, cfd)[0], dt, model, g)


def expected_step_increment_dg(state, dt, model, g, dgspace):
    return expected_step_increment(dgspace, _state(state, dgspace)[0], dt, model, g)


def pathwise_residual(space, prev, nxt, w, ftilde=None):
    """``H(next) - H(prev) - <V_prev, w> - 1/2 <w, w>``; zero for an exact energy-preserving step."""
    Up, Vp = _state(prev, space)
    Un, Vn = _state(nxt, space)
    w = np.asarray(w, dtype=float)
    dH = discrete_energy(space, Un, Vn, ftilde) - discrete_energy(space, Up, Vp, ftilde)
    return _scalar(dH - space.inner(Vp, w) - 0.5 * space.inner(w, w))


def pathwise_residual_cfd(prev, nxt, w, cfd, ftilde=None):
    return pathwise_residual(cfd, prev, nxt, w, ftilde)


def pathwise_residual_dg(prev, nxt, w, dgspace, ftilde=None):
    return pathwise_residual(dgspace, prev, nxt, w, ftilde)
