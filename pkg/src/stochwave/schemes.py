"""Time integrators for the semi-discrete system ``U' = V``, ``V' = L U - F(U) + noise``.

The energy-preserving family uses the diagonal Padé approximant of order
``l``. Writing ``B(lam)`` and ``C(lam)`` for its even and odd parts (with
``Delta t`` absorbed), one step is the coupled linear-in-increment system

    B dU - C dV   = C (2 V + w)
    B dV - C L dU = 2 C L U - 2 C g + B w

with ``g`` the discrete gradient of the potential and ``w`` the noise
vector. Eliminating with ``K = B^2 - lam C^2`` (symmetric positive definite
for every ``Delta t``) gives

    dU = K^-1 [BC (2V + 2w) + 2 lam C^2 U - 2 C^2 g]
    dV = K^-1 [lam C^2 (2V + 2w) + 2 lam BC U - 2 BC g] + w

Every polynomial is evaluated in the pencil ``(A, D)`` with ``L = A^-1 D``
after multiplying through by ``A^l``, which keeps all matrices banded.
The Crank-Nicolson-Maruyama baseline is the ``l = 1`` system with the
noise removed from the first line and ``g = F(U^n)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import polynomial as poly

from .banded import spd_solver, symmetric_operator
from .domain import ConfigurationError
from .noise import NoiseModel
from .nonlinearity import GUARD, Diffusion, Nonlinearity, get_diffusion, get_nonlinearity
from .nonlinearity import discrete_gradient  # noqa: F401

DEFAULT_TOLERANCE = 1e-12
DEFAULT_MAX_ITERATIONS = 100


class StepFailure(RuntimeError):
    """The implicit solve of a step did not converge."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


# -- Padé coefficients -------------------------------------------------------

@dataclass(frozen=True)
class PadeCoefficients:
    """Coefficients of ``N(x) = sum a_i x^i`` and ``D(x) = sum (-1)^i at_i x^i``."""

    r: int
    s: int
    numerator: tuple
    denominator: tuple

    @property
    def a(self) -> np.ndarray:
        return np.array([float(c) for c in self.numerator])

    @property
    def a_tilde(self) -> np.ndarray:
        return np.array([float(c) for c in self.denominator])

    def numerator_poly(self) -> np.ndarray:
        """Ascending coefficients including ``a_0 = 1``."""
        return np.concatenate(([1.0], self.a))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        num = poly.polyval(x, self.numerator_poly())
        signs = (-1.0) ** np.arange(1, self.s + 1)
        den = poly.polyval(x, np.concatenate(([1.0], signs * self.a_tilde)))
        return num / den


def _pade_term(r, s, i, order):
    return Fraction(factorial(r + s - i) * factorial(order),
                    factorial(r + s) * factorial(i) * factorial(order - i))


def pade_coefficients(r: int, s: int) -> PadeCoefficients:
    if r < 0 or s < 0 or r + s < 1:
        raise ConfigurationError(f"Padé orders must be non-negative with r + s >= 1, got ({r}, {s})")
    num = tuple(_pade_term(r, s, i, r) for i in range(1, r + 1))
    den = tuple(_pade_term(r, s, i, s) for i in range(1, s + 1))
    return PadeCoefficients(r, s, num, den)


def pade_polynomials(l: int, dt: float):
    """Ascending coefficients in ``lam`` of ``B`` and ``C`` for the ``(l, l)`` approximant."""
    a = pade_coefficients(l, l).numerator_poly()
    B = np.array([a[2 * k] * dt ** (2 * k) for k in range(l // 2 + 1)])
    C = np.array([a[2 * k + 1] * dt ** (2 * k + 1) for k in range((l - 1) // 2 + 1)])
    return B, C


def pencil_polynomial(A, D, coeffs, degree: int):
    """Sparse ``sum_j coeffs[j] A^(degree - j) D^j``, i.e. ``A^degree p(A^-1 D)``."""
    n = A.shape[0]
    a_pows = [sp.identity(n, format="csr")]
    d_pows = [sp.identity(n, format="csr")]
    for _ in range(degree):
        a_pows.append(sp.csr_matrix(a_pows[-1] @ A))
        d_pows.append(sp.csr_matrix(d_pows[-1] @ D))
    out = sp.csr_matrix((n, n))
    for j, c in enumerate(coeffs):
        if c != 0.0:
            out = out + c * (a_pows[degree - j] @ d_pows[j])
    out = 0.5 * (out + out.T)
    return sp.csr_matrix(out)


# -- configuration and state -------------------------------------------------

_SCHEME_RE = re.compile(r"^pade\(?(\d+)\)?$")


def parse_scheme_name(name: str):
    """``'pade2'`` or ``'pade(2)'`` -> ``('pade', 2)``; ``'bem'``/``'cnm'`` -> ``(name, None)``."""
    name = str(name).strip().lower()
    if name in ("bem", "cnm"):
        return name, None
    m = _SCHEME_RE.match(name)
    if not m or int(m.group(1)) < 1:
        raise ConfigurationError(f"unknown scheme {name!r}; expected pade<l> (l >= 1), bem or cnm")
    return "pade", int(m.group(1))


@dataclass
class SchemeState:
    U: np.ndarray
    V: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        if self.U.shape != self.V.shape:
            raise ValueError(f"U and V shapes differ: {self.U.shape} vs {self.V.shape}")


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    space: str
    dt: float
    nonlinearity: str | Nonlinearity = "zero"
    diffusion: str | Diffusion = "zero"
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    dg_epsilon: float = GUARD
    relaxation: float = 1.0
    noise: NoiseModel | None = field(default=None, compare=False)

    def __post_init__(self):
        parse_scheme_name(self.scheme)
        if self.space not in ("cfd", "dg"):
            raise ConfigurationError(f"space must be 'cfd' or 'dg', got {self.space!r}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.tolerance > 0:
            raise ConfigurationError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be at least 1")
        if not 0 < self.relaxation <= 1:
            raise ConfigurationError("relaxation must lie in (0, 1]")


# -- steppers ----------------------------------------------------------------

@dataclass
class BlockStep:
    """Result of advancing a block of paths (columns) by one step."""

    U: np.ndarray
    V: np.ndarray
    w: np.ndarray
    failed: np.ndarray
    residual: np.ndarray
    iterations: int


class Stepper:
    """Common machinery: noise assembly, projected nonlinear terms, fixed-point loop."""

    name = "stepper"

    def __init__(self, space, dt, nonlinearity="zero", diffusion="zero", model=None,
                 tolerance=DEFAULT_TOLERANCE, max_iterations=DEFAULT_MAX_ITERATIONS,
                 relaxation=1.0, eps=GUARD):
        self.space = space
        self.dt = float(dt)
        self.f = get_nonlinearity(nonlinearity)
        self.g = get_diffusion(diffusion)
        self.model = model
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.relaxation = relaxation
        self.eps = eps
        self.A, self.D = space.pencil()

    def noise(self, U, dbeta):
        if dbeta is None or self.g.is_zero:
            return np.zeros_like(U)
        if self.model is None:
            raise ConfigurationError("a noise model is required for nonzero diffusion")
        return self.space.noise_vector(U, dbeta, self.g, self.model)

    def drift(self, U):
        s = self.space
        return s.to_dof(self.f.f(s.nodal(U)))

    def gradient(self, U_new, U_old):
        s = self.space
        if self.f.kind is None:
            return s.to_dof(self.f.gradient(s.nodal(U_new), s.nodal(U_old), self.eps))
        return s.to_dof(self.f.gradient(s.nodal(U_new), s.nodal(U_old)))

    def _iterate(self, update, x):
        """Fixed point ``x <- update(x_cols, cols)`` with converged columns frozen.

        Returns the final iterate, the auxiliary value produced with it,
        failure mask, relative last change and the iteration count.
        """
        m = x.shape[1]
        aux = None
        active = np.arange(m)
        residual = np.zeros(m)
        failed = np.zeros(m, dtype=bool)
        it = 0
        for it in range(1, self.max_iterations + 1):
            old = x[:, active]
            new, a = update(old, active)
            if self.relaxation != 1.0:
                new = old + self.relaxation * (new - old)
            if aux is None:
                aux = np.zeros((a.shape[0], m))
            delta = np.max(np.abs(new - old), axis=0)
            scale = 1.0 + np.max(np.abs(new), axis=0)
            x[:, active] = new
            aux[:, active] = a
            residual[active] = delta / scale
            bad = ~np.isfinite(delta) | ~np.isfinite(scale)
            failed[active[bad]] = True
            done = bad | (delta <= self.tolerance * scale)
            active = active[~done]
            if active.size == 0:
                break
        failed[active] = True
        return x, aux, failed, residual, it

    def advance(self, U, V, dbeta=None) -> BlockStep:
        raise NotImplementedError

    def step(self, state: SchemeState, dbeta=None) -> SchemeState:
        """Advance a single path; raises :class:`StepFailure` on non-convergence."""
        squeeze = state.U.ndim == 1
        U = state.U[:, None] if squeeze else state.U
        V = state.V[:, None] if squeeze else state.V
        if dbeta is not None:
            dbeta = np.asarray(dbeta, dtype=float)
            if dbeta.ndim == 1:
                dbeta = dbeta[:, None]
        res = self.advance(U, V, dbeta)
        if res.failed.any():
            raise StepFailure(f"{self.name}: implicit solve did not converge in "
                              f"{self.max_iterations} iterations", float(np.max(res.residual)))
        Un, Vn = (res.U[:, 0], res.V[:, 0]) if squeeze else (res.U, res.V)
        return SchemeState(Un, Vn, state.t + self.dt)


class LinearBlockStepper(Stepper):
    """Shared ``K``-elimination for the Padé family and CNM."""

    def __init__(self, space, dt, l, **kw):
        super().__init__(space, dt, **kw)
        self.l = l
        B, C = pade_polynomials(l, self.dt)
        lam = np.array([0.0, 1.0])
        K = poly.polysub(poly.polymul(B, B), poly.polymul(lam, poly.polymul(C, C)))
        polys = {
            "K": K,
            "Q1": poly.polymul(B, C),
            "Q2": poly.polymul(C, C),
            "Q3": poly.polymul(lam, poly.polymul(C, C)),
            "Q4": poly.polymul(lam, poly.polymul(B, C)),
        }
        periodic = space.periodic
        mats = {k: pencil_polynomial(self.A, self.D, c, l) for k, c in polys.items()}
        self.K = spd_solver(mats["K"], periodic)
        self.Q = {k: symmetric_operator(mats[k], periodic) for k in ("Q1", "Q2", "Q3", "Q4")}

    def _linear_parts(self, U, V, wU, wV):
        Q1, Q3, Q4 = self.Q["Q1"], self.Q["Q3"], self.Q["Q4"]
        base = 2.0 * V + wU + wV
        r1 = Q1.matvec(base) + 2.0 * Q3.matvec(U)
        r2 = Q3.matvec(base) + 2.0 * Q4.matvec(U)
        return r1, r2

    def _finish(self, U, V, dU, r2, g, wV, w, failed, residual, it):
        rhs = r2 if g is None else r2 - 2.0 * self.Q["Q1"].matvec(g)
        dV = self.K.solve(rhs) + wV
        Un, Vn = U + dU, V + dV
        failed = failed | ~np.all(np.isfinite(Un), axis=0) | ~np.all(np.isfinite(Vn), axis=0)
        return BlockStep(Un, Vn, w, failed, residual, it)


class PadeStepper(LinearBlockStepper):
    """Energy-preserving Padé(l, l) step with a discrete-gradient nonlinearity."""

    def __init__(self, space, dt, l=1, **kw):
        if l < 1:
            raise ConfigurationError(f"Padé order must be >= 1, got {l}")
        super().__init__(space, dt, l, **kw)
        self.name = f"pade{l}"

    def advance(self, U, V, dbeta=None) -> BlockStep:
        w = self.noise(U, dbeta)
        r1, r2 = self._linear_parts(U, V, w, w)
        m = U.shape[1]
        if self.f.is_zero:
            dU = self.K.solve(r1)
            return self._finish(U, V, dU, r2, None, w, w, np.zeros(m, bool), np.zeros(m), 0)
        Q2 = self.Q["Q2"]
        dU = self.K.solve(r1 - 2.0 * Q2.matvec(self.drift(U)))

        def update(dU_cols, cols):
            Uc = U[:, cols]
            g = self.gradient(Uc + dU_cols, Uc)
            return self.K.solve(r1[:, cols] - 2.0 * Q2.matvec(g)), g

        dU, g, failed, residual, it = self._iterate(update, dU)
        return self._finish(U, V, dU, r2, g, w, w, failed, residual, it)


class CnmStepper(LinearBlockStepper):
    """Crank-Nicolson in the linear part, explicit drift and noise."""

    name = "cnm"

    def __init__(self, space, dt, **kw):
        super().__init__(space, dt, 1, **kw)

    def advance(self, U, V, dbeta=None) -> BlockStep:
        w = self.noise(U, dbeta)
        zero = np.zeros_like(U)
        r1, r2 = self._linear_parts(U, V, zero, w)
        m = U.shape[1]
        g = None
        if not self.f.is_zero:
            g = self.drift(U)
            r1 = r1 - 2.0 * self.Q["Q2"].matvec(g)
        dU = self.K.solve(r1)
        return self._finish(U, V, dU, r2, g, w, w, np.zeros(m, bool), np.zeros(m), 0)


class BemStepper(Stepper):
    """Backward Euler: ``(I - dt^2 L) U+ = U + dt V + dt w - dt^2 F(U+)``, ``V+ = (U+ - U)/dt``."""

    name = "bem"

    def __init__(self, space, dt, **kw):
        super().__init__(space, dt, **kw)
        mat = sp.csr_matrix(self.A - self.dt ** 2 * self.D)
        self.K = spd_solver(0.5 * (mat + mat.T), space.periodic)
        self.Aop = symmetric_operator(self.A, space.periodic)

    def advance(self, U, V, dbeta=None) -> BlockStep:
        dt = self.dt
        w = self.noise(U, dbeta)
        rhs = self.Aop.matvec(U + dt * V + dt * w)
        m = U.shape[1]
        failed = np.zeros(m, bool)
        residual = np.zeros(m)
        it = 0
        if self.f.is_zero:
            Un = self.K.solve(rhs)
        else:
            Un = self.K.solve(rhs - dt ** 2 * self.Aop.matvec(self.drift(U)))

            def update(Up, cols):
                F = self.drift(Up)
                return self.K.solve(rhs[:, cols] - dt ** 2 * self.Aop.matvec(F)), F

            Un, _, failed, residual, it = self._iterate(update, Un)
        Vn = (Un - U) / dt
        failed = failed | ~np.all(np.isfinite(Un), axis=0)
        return BlockStep(Un, Vn, w, failed, residual, it)


def make_stepper(scheme: str, space, dt, nonlinearity="zero", diffusion="zero", model=None,
                 tolerance=DEFAULT_TOLERANCE, max_iterations=DEFAULT_MAX_ITERATIONS,
                 relaxation=1.0, eps=GUARD) -> Stepper:
    kind, l = parse_scheme_name(scheme)
    kw = dict(nonlinearity=nonlinearity, diffusion=diffusion, model=model, tolerance=tolerance,
              max_iterations=max_iterations, relaxation=relaxation, eps=eps)
    if kind == "pade":
        return PadeStepper(space, dt, l, **kw)
    if kind == "cnm":
        return CnmStepper(space, dt, **kw)
    return BemStepper(space, dt, **kw)


# -- single-step functional interface ----------------------------------------

def _cached_stepper(space, config: SchemeConfig, scheme: str):
    cache = space.__dict__.setdefault("_stepper_cache", {})
    key = (scheme, config.dt, str(config.nonlinearity), str(config.diffusion), config.tolerance,
           config.max_iterations, config.relaxation, config.dg_epsilon, id(config.noise))
    entry = cache.get(key)
    if entry is None or entry[0] is not config.noise:
        stepper = make_stepper(scheme, space, config.dt, config.nonlinearity, config.diffusion,
                               config.noise, config.tolerance, config.max_iterations,
                               config.relaxation, config.dg_epsilon)
        entry = (config.noise, stepper)
        cache[key] = entry
    return entry[1]


def _dbeta(noise):
    if noise is None:
        return None
    return getattr(noise, "dbeta", noise)


def step_pade_dg_cfd(state: SchemeState, l: int, noise, cfd, config: SchemeConfig) -> SchemeState:
    """One Padé(l, l) step with compact finite differences in space."""
    return _cached_stepper(cfd, config, f"pade{l}").step(state, _dbeta(noise))


def step_pade_dg_galerkin(state: SchemeState, l: int, noise, dgspace, config: SchemeConfig) -> SchemeState:
    """One Padé(l, l) step with the interior penalty DG space."""
    return _cached_stepper(dgspace, config, f"pade{l}").step(state, _dbeta(noise))


def step_bem(state: SchemeState, space, noise, config: SchemeConfig) -> SchemeState:
    return _cached_stepper(space, config, "bem").step(state, _dbeta(noise))


def step_cnm(state: SchemeState, space, noise, config: SchemeConfig) -> SchemeState:
    return _cached_stepper(space, config, "cnm").step(state, _dbeta(noise))
