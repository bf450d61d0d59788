import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracheat.caputo import (
    TimeGrid,
    caputo_quadrature,
    diagonal_run,
    diagonal_step,
    discrete_caputo,
    history_term,
    l1_weights,
    riemann_liouville_constant,
    riemann_liouville_integral,
    stability_functional,
)
from fracheat.specfun import mittag_leffler

KAPPA_HALF = 0.28024956081989644  # Gamma(1.5) sqrt(0.1)


def test_time_grid():
    grid = TimeGrid(2.0, 8)
    assert grid.tau == 0.25
    assert grid.nodes[0] == 0.0 and grid.nodes[-1] == 2.0
    with pytest.raises(ValueError):
        TimeGrid(0.0, 4)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


def test_l1_weight_values():
    w = l1_weights(0.5, 4)
    assert w.a[0] == 1.0
    assert w.a[1] == pytest.approx(math.sqrt(2) - 1, rel=1e-15)
    assert w.a[2] == pytest.approx(math.sqrt(3) - math.sqrt(2), rel=1e-14)
    assert np.sum(w.a) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(ValueError):
        l1_weights(1.0, 4)


@settings(max_examples=50, deadline=None)
@given(gamma=st.floats(0.01, 0.99), K=st.integers(1, 300))
def test_l1_weight_invariants(gamma, K):
    a = l1_weights(gamma, K).a
    assert a[0] == 1.0
    assert np.all(a > 0)
    assert np.all(np.diff(a) < 0)
    assert np.sum(a) == pytest.approx(K ** (1 - gamma), rel=1e-12)


def test_discrete_caputo_examples():
    w = l1_weights(0.5, 4, tau=0.1)
    assert w.kappa == pytest.approx(KAPPA_HALF, rel=1e-15)
    assert discrete_caputo(w, [1.0], 1.0) == 0.0
    assert discrete_caputo(w, [1.0], 0.0) == pytest.approx(-3.568248232305542, rel=1e-14)
    assert discrete_caputo(w, [2.5, 2.5, 2.5], 2.5) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        discrete_caputo(w, [1.0] * 5, 1.0)


def test_discrete_caputo_linear_is_exact():
    # the L1 scheme is exact for linear functions: d^gamma t = t^{1-gamma} / Gamma(2-gamma)
    gamma, tau = 0.35, 0.05
    w = l1_weights(gamma, 40, tau)
    hist = tau * np.arange(21)
    value = discrete_caputo(w, hist[:-1], hist[-1])
    t = hist[-1]
    assert value == pytest.approx(t ** (1 - gamma) / math.gamma(2 - gamma), rel=1e-12)


def test_history_term_vectorizes():
    w = l1_weights(0.6, 10)
    hist = np.random.default_rng(3).standard_normal((5, 3))
    cols = [history_term(w, hist[:, j]) for j in range(3)]
    assert np.allclose(history_term(w, hist), cols, rtol=1e-15)


def test_riemann_liouville_examples():
    grid = TimeGrid(1.0, 16)
    ones = np.ones(17)
    for sigma in (0.3, 1.0, 1.7):
        for n in (1, 7, 16):
            t = grid.nodes[n]
            assert riemann_liouville_integral(sigma, grid, ones, n) == pytest.approx(
                t**sigma / math.gamma(sigma + 1), rel=1e-13
            )
    lin = grid.nodes.copy()
    assert riemann_liouville_integral(1.0, grid, lin, 16) == pytest.approx(0.5, rel=1e-14)
    assert riemann_liouville_integral(0.5, grid, lin, 16) == pytest.approx(0.752252778063675, rel=1e-13)
    with pytest.raises(ValueError):
        riemann_liouville_integral(0.5, grid, lin, 0)
    with pytest.raises(ValueError):
        riemann_liouville_integral(0.0, grid, lin, 3)


def test_riemann_liouville_sigma_one_is_trapezoid():
    grid = TimeGrid(1.0, 10)
    g = np.sin(3 * grid.nodes)
    assert riemann_liouville_integral(1.0, grid, g, 10) == pytest.approx(np.trapezoid(g, grid.nodes), rel=1e-14)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), sigma=st.floats(0.1, 0.9))
def test_riemann_liouville_continuity_bound(seed, sigma):
    # ||I^sigma g||_{L2(0,T)} <= T^sigma / Gamma(sigma+1) ||g||_{L2(0,T)}
    rng = np.random.default_rng(seed)
    grid = TimeGrid(1.5, 64)
    g = rng.standard_normal(65)
    Ig = np.array([0.0] + [riemann_liouville_integral(sigma, grid, g, n) for n in range(1, 65)])
    lhs = math.sqrt(np.trapezoid(Ig**2, grid.nodes))
    rhs = grid.T**sigma / math.gamma(sigma + 1) * math.sqrt(np.trapezoid(g**2, grid.nodes))
    assert lhs <= rhs * (1 + 1e-6)


def test_riemann_liouville_constant_panels():
    grid = TimeGrid(1.0, 4)
    vals = np.array([9.0, 1.0, 1.0, 1.0, 1.0])
    assert riemann_liouville_constant(0.5, grid, vals) == pytest.approx(1 / math.gamma(1.5), rel=1e-14)


@pytest.mark.parametrize("gamma", [0.2, 0.5, 0.9])
def test_caputo_power_rule(gamma):
    t = 0.8
    value = caputo_quadrature(np.ones_like, gamma, t)
    assert value == pytest.approx(t ** (1 - gamma) / math.gamma(2 - gamma), rel=1e-10)
    assert caputo_quadrature(np.zeros_like, gamma, t) == 0.0


def test_caputo_of_mittag_leffler():
    # d^gamma E_gamma(-t^gamma) = -E_gamma(-t^gamma); at gamma = 1/2, t = 1 this is -E_{1/2}(-1)
    gamma = 0.5

    def dg(r):
        return np.array([-(x ** (gamma - 1)) * mittag_leffler(gamma, gamma, -(x**gamma)) for x in np.atleast_1d(r)])

    value = caputo_quadrature(dg, gamma, 1.0, origin_exponent=gamma - 1)
    assert value == pytest.approx(-0.427583576155807, abs=1e-9)


def test_caputo_quadrature_validates():
    with pytest.raises(ValueError):
        caputo_quadrature(np.ones_like, 1.0, 1.0)
    assert caputo_quadrature(np.ones_like, 0.5, 0.0) == 0.0


def test_diagonal_step_examples():
    be = diagonal_step(None, 0.1, np.array([1.0]), np.array([[1.0]]), np.array([0.0]))
    assert be[0] == pytest.approx(1 / 1.1, rel=1e-15)
    w = l1_weights(0.5, 4, tau=0.1)
    l1 = diagonal_step(w, 0.1, np.array([1.0]), np.array([[1.0]]), np.array([0.0]))
    assert l1[0] == pytest.approx(0.7810977098555541, rel=1e-14)
    # zero rate and load keeps a constant
    still = diagonal_step(w, 0.1, np.array([0.0]), np.array([[2.0], [2.0]]), np.array([0.0]))
    assert still[0] == pytest.approx(2.0, rel=1e-15)


def test_diagonal_step_satisfies_scheme():
    gamma, tau, mu = 0.4, 0.05, 3.0
    w = l1_weights(gamma, 10, tau)
    U = diagonal_run(gamma, TimeGrid(0.5, 10), [mu], [1.0], lambda t: np.array([np.sin(t)]))[:, 0]
    for n in range(1, 10):
        residual = discrete_caputo(w, U[:n], U[n]) + mu * U[n] - math.sin(n * tau)
        assert abs(residual) < 1e-12


def test_stability_trivial_and_example():
    grid = TimeGrid(1.0, 8)
    zero = np.zeros(9)
    rep = stability_functional(0.5, grid, zero, zero)
    assert rep.final == (0.0, 0.0)
    U = diagonal_run(0.5, grid, [1.0], [1.0])[:, 0]
    rep = stability_functional(0.5, grid, np.abs(U), np.abs(U))
    assert rep.final[1] == pytest.approx(1.1283791670955126, rel=1e-14)
    assert rep.holds(1e-12)
    U = diagonal_run(1.0, grid, [1.0], [1.0])[:, 0]
    assert np.max(U**2) <= 1.0
    assert stability_functional(1.0, grid, np.abs(U), np.abs(U)).holds(1e-12)


def test_gamma_one_max_form_is_not_bounded_by_one():
    # with the maximum over steps in place of the last step, the bound fails for small tau mu
    grid = TimeGrid(1.0, 100)
    U = diagonal_run(1.0, grid, [1.0], [1.0])[:, 0]
    energy = grid.tau * np.sum(U[1:] ** 2)
    assert np.max(U[1:] ** 2) + energy > 1.0
    assert U[-1] ** 2 + energy <= 1.0


@settings(max_examples=40, deadline=None)
@given(
    gamma=st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9, 1.0]),
    K=st.integers(1, 80),
    seed=st.integers(0, 2**31),
    forced=st.booleans(),
)
def test_stability_randomized(gamma, K, seed, forced):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(float(rng.uniform(0.1, 3.0)), K)
    rates = rng.uniform(0.01, 200.0, size=5)
    u0 = rng.standard_normal(5)
    amp = rng.standard_normal(5) * forced
    load = lambda t: amp * np.cos(3 * t)
    U = diagonal_run(gamma, grid, rates, u0, load)
    F = np.array([load(t) for t in grid.nodes])
    rep = stability_functional(
        gamma,
        grid,
        np.sqrt(np.sum(U**2, axis=1)),
        np.sqrt(np.sum(rates * U**2, axis=1)),
        np.sqrt(np.sum(F**2 / rates, axis=1)),
    )
    assert rep.holds(1e-12)


def test_semi_discrete_rates():
    mu = math.pi
    errs = {0.5: [], 1.0: []}
    Ks = [16, 32, 64, 128]
    for gamma in errs:
        for K in Ks:
            grid = TimeGrid(1.0, K)
            U = diagonal_run(gamma, grid, [mu], [1.0])[:, 0]
            exact = np.array([mittag_leffler(gamma, 1.0, -mu * t**gamma) for t in grid.nodes])
            e = U - exact
            if gamma == 1.0:
                errs[gamma].append(np.max(np.abs(e)))
            else:
                errs[gamma].append(math.sqrt(riemann_liouville_integral(1 - gamma, grid, e**2, K)))
    for gamma, floor in ((0.5, 0.4), (1.0, 0.9)):
        rates = np.log2(np.array(errs[gamma][:-1]) / np.array(errs[gamma][1:]))
        assert np.all(rates > floor)
