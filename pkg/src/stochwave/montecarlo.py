"""Seeded Monte Carlo ensembles and temporal convergence estimates.

Paths are simulated in fixed batches of ``BATCH_SIZE`` columns. Path ``p``
draws its increments from its own stream ``path_rng(seed, p)`` and every
kernel acts on columns independently, so results depend only on
``(config, S, seed)`` and not on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cfd import CfdOperator
from .dg import DgSpace
from .domain import ConfigurationError, make_uniform_grid
from .energy import discrete_energy
from .noise import DEFAULT_TRUNCATION, default_mode_count, default_spectrum, path_rng, truncate_normals
from .nonlinearity import get_diffusion, get_nonlinearity
from .schemes import DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE, make_stepper, parse_scheme_name

BATCH_SIZE = 64
DRAW_CHUNK = 256
MAX_ABORT_FRACTION = 0.01
SLOPE_FLOOR = 1e-13


class EnsembleFailure(RuntimeError):
    """Too many sample paths aborted."""


def _steps(T, dt):
    n = T / dt
    N = int(round(n))
    if N < 1 or abs(n - N) > 1e-9 * max(1.0, n):
        raise ConfigurationError(f"T={T} is not an integer multiple of dt={dt}")
    return N


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to simulate one scheme on one scenario."""

    scheme: str
    space: str = "cfd"
    f: str = "zero"
    g: str = "one"
    dt: float = 0.05
    T: float = 1.0
    M: int = 10
    a: float = 0.0
    b: float = 1.0
    boundary: str = "dirichlet"
    u0: float = 0.0
    v0: float = 1.0
    P: int | None = None
    k_trunc: int = DEFAULT_TRUNCATION
    truncate: bool = True
    dg_degree: int = 1
    dg_sigma: float | None = None
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    scenario_id: str = ""

    def __post_init__(self):
        parse_scheme_name(self.scheme)
        get_nonlinearity(self.f)
        get_diffusion(self.g)
        if self.space not in ("cfd", "dg"):
            raise ConfigurationError(f"space must be 'cfd' or 'dg', got {self.space!r}")
        if not self.dt > 0 or not self.T > 0:
            raise ConfigurationError("dt and T must be positive")

    @property
    def N(self) -> int:
        return _steps(self.T, self.dt)

    @property
    def scheme_id(self) -> str:
        return f"{self.space}-{self.scheme}"

    def with_dt(self, dt):
        return replace(self, dt=dt)


def build_space(cfg: RunConfig):
    grid = make_uniform_grid(cfg.a, cfg.b, cfg.M, cfg.boundary)
    if cfg.space == "cfd":
        return CfdOperator(grid)
    return DgSpace(grid, cfg.dg_degree, cfg.dg_sigma)


def build_model(cfg: RunConfig, space):
    P = default_mode_count(space.grid) if cfg.P is None else cfg.P
    return default_spectrum(P, cfg.a, cfg.b, cfg.k_trunc)


def build_stepper(cfg: RunConfig, space, model):
    return make_stepper(cfg.scheme, space, cfg.dt, cfg.f, cfg.g, model,
                        cfg.tolerance, cfg.max_iterations)


def _initial_block(space, cfg, m):
    U = np.repeat(space.interpolate(lambda x: cfg.u0 + 0.0 * x)[:, None], m, axis=1)
    V = np.repeat(space.interpolate(lambda x: cfg.v0 + 0.0 * x)[:, None], m, axis=1)
    return U, V


def _batches(S):
    return [np.arange(s, min(s + BATCH_SIZE, S)) for s in range(0, S, BATCH_SIZE)]


class _Increments:
    """Per-path truncated increments, drawn lazily in chunks of steps."""

    def __init__(self, seed, paths, N, dt, P, k_trunc, truncate):
        self.rngs = [path_rng(seed, int(p)) for p in paths]
        self.N, self.dt, self.P = N, dt, P
        self.k_trunc, self.truncate = k_trunc, truncate
        self._start = 0
        self._block = None

    def __call__(self, n):
        if self._block is None or n >= self._start + self._block.shape[0]:
            self._start = n
            chunk = min(DRAW_CHUNK, self.N - n)
            xi = np.stack([r.standard_normal((chunk, self.P)) for r in self.rngs], axis=2)
            self._block = truncate_normals(xi, self.dt, self.k_trunc, self.truncate)
        return self._block[n - self._start]


def fine_increments(seed, paths, N, dt, P, k_trunc=DEFAULT_TRUNCATION, truncate=True):
    """All ``N`` increments of each path, shape ``(N, P, len(paths))``."""
    draws = _Increments(seed, paths, N, dt, P, k_trunc, truncate)
    return np.stack([draws(n) for n in range(N)])


def coarsen(increments, factor):
    """Sum consecutive groups of ``factor`` increments (same Brownian path on a coarser grid)."""
    N = increments.shape[0]
    if N % factor:
        raise ConfigurationError(f"{N} fine steps cannot be grouped by {factor}")
    return increments.reshape((N // factor, factor) + increments.shape[1:]).sum(axis=1)


# -- ensembles ---------------------------------------------------------------

@dataclass
class EnsembleStats:
    scenario_id: str
    scheme_id: str
    seed: int
    S: int
    dt: float
    t: np.ndarray
    mean_energy: np.ndarray
    stderr: np.ndarray
    mean_expected_increment_cum: np.ndarray
    mean_pathwise_residual: np.ndarray
    theory_energy: np.ndarray | None
    theory_slope: float | None
    slope_mean: float
    slope_stderr: float
    increment_defect_mean: float
    increment_defect_stderr: float
    max_abs_residual: float
    aborted: list = field(default_factory=list)
    energies: np.ndarray | None = None

    @property
    def completed(self) -> int:
        return self.S - len(self.aborted)


def _run_batch(cfg, space, model, stepper, seed, paths):
    N, dt = cfg.N, cfg.dt
    m = len(paths)
    g = get_diffusion(cfg.g)
    f = get_nonlinearity(cfg.f)
    draws = None if g.is_zero else _Increments(seed, paths, N, dt, model.P, cfg.k_trunc, cfg.truncate)
    U, V = _initial_block(space, cfg, m)
    energy = np.zeros((N + 1, m))
    expected = np.zeros((N, m))
    residual = np.zeros((N, m))
    energy[0] = discrete_energy(space, U, V, f.potential)
    alive = np.ones(m, dtype=bool)
    for n in range(N):
        db = None if draws is None else draws(n)
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        Ua, Va = U[:, idx], V[:, idx]
        res = stepper.advance(Ua, Va, None if db is None else db[:, idx])
        if not g.is_zero:
            expected[n, idx] = 0.5 * dt * space.noise_trace(g(space.nodal(Ua)), model)
        H1 = discrete_energy(space, res.U, res.V, f.potential)
        ok = ~res.failed & np.isfinite(H1)
        residual[n, idx] = H1 - energy[n, idx] - space.inner(Va, res.w) - 0.5 * space.inner(res.w, res.w)
        energy[n + 1, idx] = H1
        U[:, idx] = res.U
        V[:, idx] = res.V
        dead = idx[~ok]
        alive[dead] = False
        U[:, dead] = 0.0
        V[:, dead] = 0.0
    return energy, expected, residual, alive


def _map_batches(fn, batches, threads):
    if threads <= 1 or len(batches) == 1:
        return [fn(b) for b in batches]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, batches))


def _check_aborts(aborted, S, what):
    if len(aborted) > MAX_ABORT_FRACTION * S:
        raise EnsembleFailure(f"{what}: {len(aborted)} of {S} paths aborted "
                              f"(limit {MAX_ABORT_FRACTION:.0%})")


def theory_slope(cfg: RunConfig, model) -> float | None:
    """Energy growth rate ``c^2/2 * sum_k q_k`` of the exact solution under additive noise ``g = c``."""
    g = get_diffusion(cfg.g)
    if g.constant is None:
        return None
    return 0.5 * g.constant ** 2 * float(np.sum(model.q))


def run_ensemble(config: RunConfig, S: int, seed: int = 0, threads: int = 1,
                 keep_paths: bool = False) -> EnsembleStats:
    if S < 1:
        raise ConfigurationError(f"need at least one sample path, got S={S}")
    space = build_space(config)
    model = build_model(config, space)
    stepper = build_stepper(config, space, model)
    space.noise_basis(model)  # fill caches before threads share the space
    if hasattr(space, "_noise_gram"):
        space._noise_gram(model)

    def work(paths):
        return _run_batch(config, space, model, stepper, seed, paths)

    parts = _map_batches(work, _batches(S), threads)
    energy = np.concatenate([p[0] for p in parts], axis=1)
    expected = np.concatenate([p[1] for p in parts], axis=1)
    residual = np.concatenate([p[2] for p in parts], axis=1)
    alive = np.concatenate([p[3] for p in parts])
    aborted = [int(p) for p in np.flatnonzero(~alive)]
    _check_aborts(aborted, S, config.scheme_id)

    E, X, R = energy[:, alive], expected[:, alive], residual[:, alive]
    k = E.shape[1]
    N, dt = config.N, config.dt
    t = dt * np.arange(N + 1)

    # shifted data: exact zero spread when all paths coincide
    shifted = E - E[:, :1]
    dbar = shifted.mean(axis=1)
    mean_energy = E[:, 0] + dbar
    if k > 1:
        stderr = np.sqrt(np.sum((shifted - dbar[:, None]) ** 2, axis=1) / (k - 1) / k)
    else:
        stderr = np.zeros(N + 1)
    cum = np.concatenate(([0.0], np.cumsum(X.mean(axis=1))))
    mean_res = np.concatenate(([0.0], R.mean(axis=1)))

    tc = t - t.mean()
    slopes = tc @ E / (tc @ tc)
    defect = (np.diff(E, axis=0) - X).mean(axis=0)

    def sem(x):
        return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0

    rate = theory_slope(config, model)
    theory = None if rate is None else mean_energy[0] + rate * t
    return EnsembleStats(
        scenario_id=config.scenario_id, scheme_id=config.scheme_id, seed=seed, S=S, dt=dt, t=t,
        mean_energy=mean_energy, stderr=stderr, mean_expected_increment_cum=cum,
        mean_pathwise_residual=mean_res, theory_energy=theory, theory_slope=rate,
        slope_mean=float(slopes.mean()), slope_stderr=sem(slopes),
        increment_defect_mean=float(defect.mean()), increment_defect_stderr=sem(defect),
        max_abs_residual=float(np.max(np.abs(R))) if R.size else 0.0,
        aborted=aborted, energies=E if keep_paths else None,
    )


# -- temporal order -----------------------------------------------------------

@dataclass
class ConvergenceReport:
    scheme_id: str
    N: list
    dt: list
    rmse: list
    slope: float | None
    N_ref: int
    S: int
    aborted: list = field(default_factory=list)


def _simulate(stepper, space, cfg, increments):
    """Run all columns over the given increments; returns final U, V and failure mask."""
    m = increments.shape[2]
    U, V = _initial_block(space, cfg, m)
    alive = np.ones(m, dtype=bool)
    for n in range(increments.shape[0]):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        res = stepper.advance(U[:, idx], V[:, idx], increments[n][:, idx])
        U[:, idx] = res.U
        V[:, idx] = res.V
        bad = idx[res.failed]
        alive[bad] = False
        U[:, bad] = 0.0
        V[:, bad] = 0.0
    return U, V, alive


def fit_slope(dts, errors):
    """Least-squares slope of ``log(error)`` against ``log(dt)``; ``None`` at rounding level."""
    errors = np.asarray(errors, dtype=float)
    if np.all(errors < SLOPE_FLOOR) or np.any(errors <= 0):
        return None
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])


def estimate_order(config: RunConfig, N_list, S: int, seed: int = 0, N_ref: int = 2048,
                   threads: int = 1, include_v: bool = False) -> ConvergenceReport:
    """RMS error at ``T`` against a fine reference driven by the same Brownian paths.

    Coarse increments are exact sums of the fine ones. The error norm is the
    space's L2 norm of ``U`` (plus ``V`` when ``include_v``).
    """
    N_list = sorted(int(n) for n in N_list)
    if len(set(N_list)) != len(N_list):
        raise ConfigurationError("N values must be distinct")
    for n in N_list:
        if N_ref % n or n >= N_ref:
            raise ConfigurationError(f"reference N_ref={N_ref} must be a proper multiple of N={n}")
    T = config.T
    space = build_space(config)
    model = build_model(config, space)
    space.noise_basis(model)
    fine_dt = T / N_ref
    steppers = {n: build_stepper(config.with_dt(T / n), space, model) for n in N_list + [N_ref]}
    g = get_diffusion(config.g)

    def work(paths):
        if g.is_zero:
            inc = np.zeros((N_ref, model.P, len(paths)))
        else:
            inc = fine_increments(seed, paths, N_ref, fine_dt, model.P, config.k_trunc, config.truncate)
        Uref, Vref, alive = _simulate(steppers[N_ref], space, config, inc)
        errs = []
        for n in N_list:
            U, V, ok = _simulate(steppers[n], space, config, coarsen(inc, N_ref // n))
            alive &= ok
            e2 = space.inner(U - Uref, U - Uref)
            if include_v:
                e2 = e2 + space.inner(V - Vref, V - Vref)
            errs.append(e2)
        return np.array(errs), alive

    parts = _map_batches(work, _batches(S), threads)
    err2 = np.concatenate([p[0] for p in parts], axis=1)
    alive = np.concatenate([p[1] for p in parts])
    aborted = [int(p) for p in np.flatnonzero(~alive)]
    _check_aborts(aborted, S, config.scheme_id)
    rmse = np.sqrt(err2[:, alive].mean(axis=1))
    dts = [T / n for n in N_list]
    return ConvergenceReport(config.scheme_id, N_list, dts, [float(e) for e in rmse],
                             fit_slope(dts, rmse), N_ref, S, aborted)
