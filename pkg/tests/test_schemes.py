from fractions import Fraction

import numpy as np
import pytest

from stochwave.cfd import CfdOperator
from stochwave.dg import DgSpace
from stochwave.domain import ConfigurationError, make_uniform_grid
from stochwave.energy import discrete_energy
from stochwave.noise import IncrementBlock, default_spectrum
from stochwave.nonlinearity import discrete_gradient, get_nonlinearity
from stochwave.schemes import (
    SchemeConfig,
    SchemeState,
    StepFailure,
    make_stepper,
    pade_coefficients,
    parse_scheme_name,
    step_bem,
    step_cnm,
    step_pade_dg_cfd,
    step_pade_dg_galerkin,
)


def cfd(M=6):
    return CfdOperator(make_uniform_grid(0, 1, M))


def dense_L(space):
    A, D = space.pencil()
    return np.linalg.solve(A.toarray(), D.toarray())


def random_inputs(n, seed, scale=0.5):
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal(n), scale * rng.standard_normal(n), 0.1 * rng.standard_normal(n)


def solve_literal(Mblock, rhs_fn, U, tol=1e-15, maxit=200):
    """Fixed point on the nonlinear term with a dense solve of the literal block system."""
    n = U.size
    X = np.concatenate([U, np.zeros(n)])
    U1 = U.copy()
    for _ in range(maxit):
        X = np.linalg.solve(Mblock, rhs_fn(U1))
        if np.max(np.abs(X[:n] - U1)) <= tol:
            U1 = X[:n]
            break
        U1 = X[:n]
    return X[:n], X[n:]


# -- Padé coefficients --------------------------------------------------------

def test_pade_coefficients_exact():
    p11 = pade_coefficients(1, 1)
    assert p11.numerator == (Fraction(1, 2),) and p11.denominator == (Fraction(1, 2),)
    p22 = pade_coefficients(2, 2)
    assert p22.numerator == (Fraction(1, 2), Fraction(1, 12))
    assert p22.denominator == p22.numerator
    assert pade_coefficients(3, 3).numerator == (Fraction(1, 2), Fraction(1, 10), Fraction(1, 120))


def test_pade_degenerate_and_errors():
    p = pade_coefficients(1, 0)
    assert p.numerator == (Fraction(1),) and p.denominator == ()
    assert p(0.3) == pytest.approx(1.3)
    for r, s in ((-1, 1), (0, 0)):
        with pytest.raises(ConfigurationError):
            pade_coefficients(r, s)


def test_pade_approximates_exp():
    for l in (1, 2, 3):
        p = pade_coefficients(l, l)
        x = 1e-2
        assert abs(p(x) - np.exp(x)) < 10 * x ** (2 * l + 1)


def test_scheme_names():
    assert parse_scheme_name("pade(2)") == ("pade", 2)
    assert parse_scheme_name("PADE1") == ("pade", 1)
    assert parse_scheme_name("bem") == ("bem", None)
    for bad in ("pade0", "rk4", "pade"):
        with pytest.raises(ConfigurationError):
            parse_scheme_name(bad)


# -- discrete gradient --------------------------------------------------------

def test_discrete_gradient_examples():
    quartic = get_nonlinearity("cubic")
    assert discrete_gradient(quartic.potential, quartic.f, np.array([2.0]), np.array([0.0]))[0] == 2.0
    sine = get_nonlinearity("sin")
    assert discrete_gradient(sine.potential, sine.f, np.array([np.pi]), np.array([0.0]))[0] == pytest.approx(2 / np.pi)
    c = np.array([0.7])
    assert discrete_gradient(sine.potential, sine.f, c, c)[0] == np.sin(0.7)


@pytest.mark.parametrize("name", ["zero", "sin", "cubic"])
def test_closed_forms_match_quotient(name):
    nl = get_nonlinearity(name)
    rng = np.random.default_rng(0)
    a = rng.uniform(-2, 2, 200)
    b = a + rng.uniform(-1, 1, 200)
    np.testing.assert_allclose(nl.gradient(a, b), discrete_gradient(nl.potential, nl.f, a, b),
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(nl.gradient(a, a), nl.f(a), rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(nl.gradient(a + 1e-9, a), nl.f(a + 5e-10), rtol=1e-8, atol=1e-12)


# -- reduction to the literal l = 1, 2 displays -------------------------------

def literal_p11(L, dt, U, V, w, grad):
    n = U.size
    I = np.eye(n)
    M = np.block([[I, -dt / 2 * I], [-dt / 2 * L, I]])

    def rhs(U1):
        return np.concatenate([U + dt / 2 * V + dt / 2 * w,
                               V + dt / 2 * L @ U - dt * grad(U1, U) + w])
    return M, rhs


def literal_p22(L, dt, U, V, w, grad):
    n = U.size
    I = np.eye(n)
    c = dt ** 2 / 12
    M = np.block([[I + c * L, -dt / 2 * I], [-dt / 2 * L, I + c * L]])

    def rhs(U1):
        return np.concatenate([U + c * L @ U + dt / 2 * V + dt / 2 * w,
                               V + c * L @ V + dt / 2 * L @ U - dt * grad(U1, U) + w + c * L @ w])
    return M, rhs


@pytest.mark.parametrize("l,literal", [(1, literal_p11), (2, literal_p22)])
@pytest.mark.parametrize("fname", ["zero", "sin", "cubic"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_general_stepper_reduces_to_literal_display(l, literal, fname, seed):
    space = cfd(6)
    dt = 0.05
    U, V, w = random_inputs(5, seed)
    nl = get_nonlinearity(fname)
    st = make_stepper(f"pade{l}", space, dt, fname, "zero")
    # feed the noise vector directly: one mode per node with unit coefficients
    st.noise = lambda U_, dbeta: np.repeat(w[:, None], U_.shape[1], axis=1)
    res = st.advance(U[:, None], V[:, None], np.zeros((1, 1)))
    M, rhs = literal(dense_L(space), dt, U, V, w, nl.gradient)
    U1, V1 = solve_literal(M, rhs, U)
    assert np.max(np.abs(res.U[:, 0] - U1)) <= 1e-12
    assert np.max(np.abs(res.V[:, 0] - V1)) <= 1e-12


def literal_general(L, dt, l, U, V, w, grad):
    """Dense transcription of the general two-line Padé step."""
    a = pade_coefficients(l, l).numerator_poly()
    n = U.size
    I = np.eye(n)
    Lk = [np.linalg.matrix_power(L, k) for k in range(l + 1)]
    b = [a[2 * k] * dt ** (2 * k) * Lk[k] for k in range(l // 2 + 1)]
    c = [a[2 * k + 1] * dt ** (2 * k + 1) * Lk[k] for k in range((l - 1) // 2 + 1)]
    Bsum1 = sum(b[1:], np.zeros((n, n)))
    Csum = sum(c)
    Bsum0 = sum(b)
    M = np.block([[I + Bsum1, -Csum], [-Csum @ L, I + Bsum1]])

    def rhs(U1):
        return np.concatenate([U + Bsum1 @ U + Csum @ V + Csum @ w,
                               V + Bsum1 @ V + Csum @ L @ U - 2 * Csum @ grad(U1, U) + Bsum0 @ w])
    return M, rhs


@pytest.mark.parametrize("l", [1, 2, 3, 4])
@pytest.mark.parametrize("space_kind", ["cfd", "dg"])
def test_general_stepper_matches_dense_construction(l, space_kind):
    grid = make_uniform_grid(0, 1, 6)
    space = cfd(6) if space_kind == "cfd" else DgSpace(grid, 1)
    dt = 0.02
    U, V, w = random_inputs(space.dof, 10 + l)
    st = make_stepper(f"pade{l}", space, dt, "sin", "zero")
    st.noise = lambda U_, dbeta: np.repeat(w[:, None], U_.shape[1], axis=1)
    res = st.advance(U[:, None], V[:, None], np.zeros((1, 1)))
    grad = st.gradient if space_kind == "dg" else get_nonlinearity("sin").gradient
    M, rhs = literal_general(dense_L(space), dt, l, U, V, w, grad)
    U1, V1 = solve_literal(M, rhs, U)
    scale = 1 + np.max(np.abs(V1))
    assert np.max(np.abs(res.U[:, 0] - U1)) <= 1e-11 * scale
    assert np.max(np.abs(res.V[:, 0] - V1)) <= 1e-11 * scale


@pytest.mark.parametrize("l", [1, 2, 3])
def test_modal_amplification_is_pade_of_generator(l):
    M = 10
    space = cfd(M)
    dt = 0.1
    k = 2
    mode = np.sin(k * np.pi * space.grid.dof_nodes)
    s = np.sin(k * np.pi / (2 * M)) ** 2
    lam = (-4 * s * M ** 2) / (1 - s / 3)
    J = dt * np.array([[0.0, 1.0], [lam, 0.0]])
    a = pade_coefficients(l, l).numerator_poly()
    N = sum(a[i] * np.linalg.matrix_power(J, i) for i in range(l + 1))
    D = sum((-1) ** i * a[i] * np.linalg.matrix_power(J, i) for i in range(l + 1))
    G = np.linalg.solve(D, N)
    x0 = np.array([0.3, -1.1])
    st = make_stepper(f"pade{l}", space, dt)
    out = st.step(SchemeState(x0[0] * mode, x0[1] * mode))
    x1 = G @ x0
    np.testing.assert_allclose(out.U, x1[0] * mode, atol=1e-10)
    np.testing.assert_allclose(out.V, x1[1] * mode, atol=1e-10)


def test_linear_first_step_from_rest_position():
    space = cfd(6)
    dt = 0.1
    v = np.random.default_rng(4).standard_normal(5)
    L = dense_L(space)
    out = make_stepper("pade1", space, dt).step(SchemeState(np.zeros(5), v))
    expected = np.linalg.solve(np.eye(5) - dt ** 2 / 4 * L, dt * v)
    np.testing.assert_allclose(out.U, expected, atol=1e-12)


# -- qualitative behaviour ----------------------------------------------------

@pytest.mark.parametrize("space_kind", ["cfd", "dg"])
def test_cnm_equals_pade1_without_forcing(space_kind):
    grid = make_uniform_grid(0, 1, 8)
    space = cfd(8) if space_kind == "cfd" else DgSpace(grid, 1)
    U, V, _ = random_inputs(space.dof, 3)
    a = make_stepper("cnm", space, 0.05).step(SchemeState(U, V))
    b = make_stepper("pade1", space, 0.05).step(SchemeState(U, V))
    assert np.max(np.abs(a.U - b.U)) <= 1e-12 and np.max(np.abs(a.V - b.V)) <= 1e-12


@pytest.mark.parametrize("scheme", ["pade1", "pade2", "bem", "cnm"])
def test_zero_state_stays_zero(scheme):
    space = cfd(8)
    model = default_spectrum(7)
    st = make_stepper(scheme, space, 0.05, "cubic", "identity", model)
    out = st.step(SchemeState(np.zeros(7), np.zeros(7)), np.zeros(7))
    assert not out.U.any() and not out.V.any()


@pytest.mark.parametrize("space_kind", ["cfd", "dg"])
def test_bem_dissipates(space_kind):
    grid = make_uniform_grid(0, 1, 10)
    space = cfd(10) if space_kind == "cfd" else DgSpace(grid, 1)
    st = make_stepper("bem", space, 0.05)
    state = SchemeState(space.interpolate(lambda x: np.sin(np.pi * x)), space.interpolate(lambda x: 1.0 + 0 * x))
    H = [discrete_energy(space, state.U, state.V)]
    for _ in range(50):
        state = st.step(state)
        H.append(discrete_energy(space, state.U, state.V))
    assert np.all(np.diff(H) < 0)


def test_pade1_and_pade2_agree_to_second_order():
    space = cfd(10)
    U0 = np.sin(np.pi * space.grid.dof_nodes)
    V0 = np.zeros(9)
    diffs = []
    for N in (20, 40, 80):
        dt = 0.5 / N
        s1, s2 = SchemeState(U0, V0), SchemeState(U0, V0)
        a, b = make_stepper("pade1", space, dt), make_stepper("pade2", space, dt)
        for _ in range(N):
            s1, s2 = a.step(s1), b.step(s2)
        diffs.append(np.max(np.abs(s1.U - s2.U)))
    rates = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
    assert np.all(np.abs(rates - 2) < 0.1)


def test_doubling_iterations_does_not_change_accepted_step():
    space = cfd(12)
    model = default_spectrum(11)
    U, V, _ = random_inputs(11, 7, scale=1.0)
    db = 0.2 * np.random.default_rng(8).standard_normal(11)
    a = make_stepper("pade2", space, 0.1, "cubic", "sin", model, max_iterations=100).step(SchemeState(U, V), db)
    b = make_stepper("pade2", space, 0.1, "cubic", "sin", model, max_iterations=200).step(SchemeState(U, V), db)
    assert np.max(np.abs(a.U - b.U)) <= 1e-12
    assert np.max(np.abs(a.V - b.V)) <= 1e-12


def test_nonconvergence_raises_step_failure():
    space = cfd(12)
    U, V, _ = random_inputs(11, 7, scale=2.0)
    st = make_stepper("pade1", space, 0.5, "cubic", "zero", max_iterations=2)
    with pytest.raises(StepFailure) as exc:
        st.step(SchemeState(U, V))
    assert exc.value.residual > 0


def test_columns_do_not_interact():
    space = cfd(12)
    model = default_spectrum(11)
    rng = np.random.default_rng(9)
    U = rng.standard_normal((11, 4))
    V = rng.standard_normal((11, 4))
    db = 0.2 * rng.standard_normal((11, 4))
    st = make_stepper("pade2", space, 0.1, "cubic", "sin", model)
    block = st.advance(U, V, db)
    for j in range(4):
        one = st.advance(U[:, [j]], V[:, [j]], db[:, [j]])
        assert np.array_equal(block.U[:, j], one.U[:, 0])
        assert np.array_equal(block.V[:, j], one.V[:, 0])


# -- functional interface -----------------------------------------------------

def test_functional_wrappers_dispatch():
    grid = make_uniform_grid(0, 1, 8)
    c, d = CfdOperator(grid), DgSpace(grid, 1)
    model = default_spectrum(7)
    cfg = SchemeConfig("pade1", "cfd", 0.05, "sin", "sin", noise=model)
    inc = IncrementBlock(0.1 * np.ones(7), 0.05)
    for space, fn in ((c, lambda s: step_pade_dg_cfd(s, 2, inc, c, cfg)),
                      (d, lambda s: step_pade_dg_galerkin(s, 2, inc, d, cfg)),
                      (c, lambda s: step_bem(s, c, inc, cfg)),
                      (d, lambda s: step_cnm(s, d, inc, cfg))):
        state = SchemeState(np.zeros(space.dof), np.ones(space.dof))
        out = fn(state)
        assert out.t == pytest.approx(0.05)
        assert np.all(np.isfinite(out.U)) and np.any(out.U != 0)
    direct = make_stepper("pade2", c, 0.05, "sin", "sin", model).step(
        SchemeState(np.zeros(7), np.ones(7)), inc.dbeta)
    np.testing.assert_array_equal(step_pade_dg_cfd(SchemeState(np.zeros(7), np.ones(7)), 2, inc, c, cfg).U, direct.U)


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(tolerance=0.0), dict(space="fem"), dict(scheme="rk4")])
def test_scheme_config_validation(kw):
    base = dict(scheme="pade1", space="cfd", dt=0.1)
    base.update(kw)
    with pytest.raises(ConfigurationError):
        SchemeConfig(**base)


@pytest.mark.parametrize("scheme", ["pade1", "bem", "cnm"])
def test_dg_columns_do_not_interact(scheme):
    space = DgSpace(make_uniform_grid(0, 1, 8), 2)
    model = default_spectrum(7)
    rng = np.random.default_rng(10)
    U = 0.5 * rng.standard_normal((space.dof, 5))
    V = rng.standard_normal((space.dof, 5))
    db = 0.2 * rng.standard_normal((7, 5))
    st = make_stepper(scheme, space, 0.05, "sin", "identity", model)
    block = st.advance(U, V, db)
    for j in range(5):
        one = st.advance(U[:, [j]], V[:, [j]], db[:, [j]])
        assert np.array_equal(block.U[:, j], one.U[:, 0])
