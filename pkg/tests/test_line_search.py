import math

import numpy as np
import pytest

from atd.engine import run_atd
from atd.errors import InvalidArgument, LineSearchFailure
from atd.line_search import (diagnostics, eval_zeta, find_lambda, gap_bound, probe_budget,
                             window, zeta_value)
from atd.oracle import ProblemInstance
from atd.problems import make_power_regression
from atd.state import ATDConfig, SolverState

from conftest import cube6


def test_budget_worked_example():
    # ceil(L ||x*||^3 / eps) = 1024
    assert probe_budget(2, 1.0, 1.0, 1.0 / 1024) == 70


def test_budget_never_below_one():
    assert probe_budget(1, 1.0, 1.0, 10.0) == 1
    with pytest.raises(InvalidArgument):
        probe_budget(2, 1.0, 1.0, 0.0)


def test_gap_bound_examples():
    z = np.array([0.1, 0.0])
    # (p+2)(12p^3+4)/p! = 4 * 100 / 2 at p = 2
    assert gap_bound(z, 2, 1.0, 1.0) == pytest.approx(2.0, rel=1e-12)
    assert gap_bound(np.zeros(2), 2, 1.0, 1.0) == 0.0
    assert gap_bound(z / 2, 2, 1.0, 1.0) == pytest.approx(gap_bound(z, 2, 1.0, 1.0) / 4, rel=1e-14)
    with pytest.raises(InvalidArgument):
        gap_bound(z, 2, 1.0, None)


def test_first_order_zeta_ignores_step_length():
    assert zeta_value(0.25, 1e-3, 1, 2.0) == zeta_value(0.25, 7.0, 1, 2.0) == 0.5


def _state(x, y, A=1.0):
    s = SolverState.initial(len(x), 0.0)
    s.k, s.A, s.x, s.y = 1, A, np.asarray(x, float), np.asarray(y, float)
    return s


def test_eval_zeta_scalar_replay():
    # theta = 1/2 puts x~ at 1, where the cubic step is -1/3; lambda = 0.5 * A
    zeta, sol, x_tilde = eval_zeta(cube6(), _state([1.5], [0.5]), 0.5)
    assert x_tilde[0] == 1.0
    assert sol.z[0] == pytest.approx(-1 / 3, abs=1e-8)
    assert zeta == pytest.approx(0.5 * (1 / 3), rel=1e-8)


def test_eval_zeta_vanishes_as_theta_goes_to_one():
    state = _state([1.5], [0.5])
    zs = [eval_zeta(cube6(), state, 1 - 10.0 ** -j)[0] for j in (1, 3, 6)]
    assert zs[0] > zs[1] > zs[2] and zs[2] < 1e-5


def test_eval_zeta_domain():
    with pytest.raises(InvalidArgument):
        eval_zeta(cube6(), _state([1.0], [0.0]), 1.0)


def test_first_iteration_is_one_probe():
    inst = make_power_regression(10, 20, 2, seed=0)
    ls = find_lambda(inst, SolverState.initial(10, inst.oracle.peek_value(np.zeros(10))), 1e-12)
    assert ls.iterations == 1 and math.isnan(ls.theta)
    assert ls.lam == pytest.approx(7 / 12 / (inst.lipschitz * np.linalg.norm(ls.z)), rel=1e-12)
    assert ls.zeta == pytest.approx(7 / 12, rel=1e-12)


def test_first_order_closed_form_step():
    inst = make_power_regression(10, 20, 1, seed=0)
    res = run_atd(inst, 15, 1e-300)
    for r in res.records[1:]:
        assert r.bisect_iters == 1
        assert r.lambda_k == pytest.approx(1 / (2 * inst.lipschitz), rel=1e-12)


@pytest.mark.parametrize("p", [2, 3])
def test_accepted_steps_sit_in_window(p):
    res = run_atd(make_power_regression(10, 20, p, seed=1), 40, 1e-300)
    lo, hi = window(p)
    for r in res.records[1:]:
        assert lo - 1e-9 <= r.zeta_k <= hi + 1e-9


def test_warm_start_saves_probes():
    inst = make_power_regression(10, 20, 2, seed=0)
    warm = run_atd(inst, 60, 1e-300)
    cold = run_atd(inst, 60, 1e-300, ATDConfig(warm_start=False))
    total = lambda res: sum(r.bisect_iters for r in res.records)  # noqa: E731
    assert total(warm) < total(cold)


def test_budget_exhaustion_reports_probes():
    inst = make_power_regression(10, 20, 2, seed=0)
    with pytest.raises(LineSearchFailure) as info:
        run_atd(inst, 100, 1e-300, ATDConfig(max_probes_override=1))
    assert len(info.value.probes) == 1


def test_unknown_minimum_uses_radius_bound():
    true = make_power_regression(10, 20, 2, seed=0)
    blind = ProblemInstance(true.oracle)
    res = run_atd(blind, 30, 1e-3, ATDConfig(radius=1.0))
    assert res.early_exit is not None and res.early_exit.source in ("gap", "certificate")
    assert true.oracle.peek_value(res.early_exit.point) <= 1e-3
    assert all(math.isnan(r.gap) for r in res.records)


def _one_search(seed=0, steps=5):
    inst = make_power_regression(10, 20, 2, seed=seed)
    res = run_atd(inst, steps, 1e-300, ATDConfig())
    state = res.state
    return inst, state, find_lambda(inst, state, 1e-300)


def test_diagnostics_clean_with_true_radius():
    inst, state, ls = _one_search()
    assert diagnostics(ls, state, 2, inst.norm_x_star, inst.x_star) == []


def test_diagnostics_flag_small_radius():
    inst, state, ls = _one_search()
    found = diagnostics(ls, state, 2, 0.01 * inst.norm_x_star, inst.x_star)
    assert {"x_tilde_diameter"} <= {v.kind for v in found}


def test_diagnostics_identical_probes():
    inst, state, ls = _one_search()
    ls.probes = [ls.probes[0], ls.probes[0]]
    assert not [v for v in diagnostics(ls, state, 2, inst.norm_x_star) if v.kind == "z_speed"]
