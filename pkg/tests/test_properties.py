import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from atd.bench import fit_slope
from atd.engine import compute_a_next, momentum_point
from atd.oracle import taylor_value
from atd.problems import PowerProfile, RidgeOracle
from atd.subsolver import regularized_grad, solve_model, solve_p2_secular, solve_generic_newton
from atd.oracle import TaylorExpansion

pos = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)


@given(pos, st.floats(min_value=0.0, max_value=1e6))
def test_coupling_identity(lam, A):
    a, A_next = compute_a_next(lam, A)
    assert a > 0 and A_next == A + a
    assert math.isclose(lam * A_next, a * a, rel_tol=1e-12)


@given(st.floats(min_value=0.0, max_value=1e3), pos,
       st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_momentum_point_is_convex_combination(A, a, y, x):
    y, x = np.array(y), np.array(x)
    xt = momentum_point(A, a, y, x)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    assert np.all(xt >= lo - 1e-9) and np.all(xt <= hi + 1e-9)


class _Quadratic(TaylorExpansion):
    def __init__(self, g, H):
        super().__init__(np.zeros_like(g), 2, 0.0, g)
        self.H = H

    def value(self, h):
        return float(self.g0 @ h + 0.5 * h @ self.H @ h)

    def grad(self, h):
        return self.g0 + self.H @ h

    def hess(self, h):
        return self.H


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 31 - 1), st.floats(0.05, 20.0))
def test_secular_step_is_stationary(d, seed, L):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(d, d))
    H = B @ B.T * rng.uniform(0, 2)
    g = rng.normal(size=d)
    model = _Quadratic(g, H)
    z = solve_p2_secular(g, H, L)
    assert np.linalg.norm(regularized_grad(model, L, z)) <= 1e-9 * max(1.0, np.linalg.norm(g))
    # Newton from scratch lands on the same (unique) minimizer
    z_newton = solve_generic_newton(model, L, 1e-11).z
    assert np.linalg.norm(z - z_newton) <= 1e-7 * max(1.0, np.linalg.norm(z))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 3))
def test_subproblem_residual_on_power_models(seed, p):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(6, 3))
    oracle = RidgeOracle(A, rng.normal(size=6), p, PowerProfile(p + 1))
    model = oracle.peek_expansion(rng.normal(size=3))
    sol = solve_model(model, oracle.lipschitz, 1e-10)
    assert sol.stationarity_residual <= 1e-10 * max(1.0, np.linalg.norm(model.g0))
    assert sol.model_value <= model.f0


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2),
       st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_second_order_model_of_quadratic_is_exact(x, y):
    oracle = RidgeOracle([[1.0, 2.0], [0.5, -1.0]], [0.3, 0.1], 2, PowerProfile(2), lipschitz=1.0)
    exact = oracle.peek_value(np.array(y))
    assert math.isclose(taylor_value(oracle, x, y), exact, rel_tol=1e-12, abs_tol=1e-12)


@given(st.floats(-6.0, -0.5), st.floats(1e-3, 1e3))
def test_slope_of_exact_power_law(exponent, scale):
    k = np.arange(1, 81, dtype=float)
    est = fit_slope({"k": k, "gap": scale * k ** exponent})
    assert math.isclose(est.slope, exponent, abs_tol=1e-9)
