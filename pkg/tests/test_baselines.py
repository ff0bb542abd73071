import numpy as np
import pytest

from atd.baselines import BaselineConfig, run_agd, run_baseline, run_gd, run_tensor
from atd.bench import fit_slope
from atd.errors import InvalidArgument
from atd.oracle import ProblemInstance
from atd.problems import PowerProfile, RidgeOracle, make_power_regression
from atd.state import TRACE_COLUMNS


def half_square_1d():
    return ProblemInstance(RidgeOracle([[1.0]], [0.0], 1, PowerProfile(2)), x_star=[0.0])


def ill_conditioned_quadratic(seed, cond=100.0, d=10):
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.normal(size=(d, d)))
    V, _ = np.linalg.qr(rng.normal(size=(d, d)))
    s = np.sqrt(np.geomspace(1.0, 1.0 / cond, d))
    A = U @ np.diag(s) @ V.T
    x_star = rng.normal(size=d)
    x_star /= np.linalg.norm(x_star)
    return ProblemInstance(RidgeOracle(A, A @ x_star, 1, PowerProfile(2)), x_star=x_star, f_star=0.0)


def test_gd_exact_step_on_unit_quadratic():
    res = run_gd(half_square_1d(), 3, x0=[1.0])
    assert [r.gap for r in res.records] == [0.5, 0.0, 0.0, 0.0]


@pytest.mark.parametrize("runner", [run_gd, run_agd])
def test_first_order_start_at_optimum(runner):
    inst = make_power_regression(5, 9, 2, seed=0, target_norm=0.0)
    res = runner(inst, 10, L1=1.0)
    assert all(r.gap == 0.0 for r in res.records)


def test_tensor_start_at_optimum():
    inst = make_power_regression(5, 9, 2, seed=0, target_norm=0.0)
    res = run_tensor(inst, 10)
    assert all(r.gap == 0.0 and (r.k == 0 or r.step_norm == 0.0) for r in res.records)


@pytest.mark.parametrize("seed", range(3))
def test_classical_bounds_on_quadratics(seed):
    inst = make_power_regression(10, 20, 1, seed=seed)
    L = inst.lipschitz
    gd, agd = run_gd(inst, 100), run_agd(inst, 100)
    for r in gd.records[1:]:
        assert r.gap <= L / (2 * r.k) * (1 + 1e-9)
    for r in agd.records[1:]:
        assert r.gap <= 2 * L / r.k ** 2 * (1 + 1e-9)
        assert r.gap <= r.certificate * (1 + 1e-9)
    gaps = gd.gaps()
    assert np.all(np.diff(gaps) <= 1e-15)


@pytest.mark.parametrize("seed", range(3))
def test_agd_beats_gd_when_ill_conditioned(seed):
    inst = ill_conditioned_quadratic(seed)
    assert run_agd(inst, 100).final.gap <= run_gd(inst, 100).final.gap


def test_tensor_is_monotone_and_fast():
    inst = make_power_regression(10, 20, 2, seed=0)
    res = run_tensor(inst, 100)
    assert res.violations == []
    assert np.all(np.diff(res.gaps()) <= 0)
    assert fit_slope(res, 10, 100).slope < -2.5


def test_tensor_needs_second_order():
    with pytest.raises(InvalidArgument):
        run_tensor(make_power_regression(3, 5, 1, seed=0), 5)


def test_missing_smoothness_constant():
    inst = make_power_regression(4, 6, 2, seed=0)
    blind = ProblemInstance(inst.oracle)
    with pytest.raises(InvalidArgument):
        run_gd(blind, 5)
    with pytest.raises(InvalidArgument):
        run_agd(blind, 5, L1=-1.0)
    run_gd(blind, 5, L1=10.0)


def test_shared_schema():
    inst = make_power_regression(4, 6, 2, seed=0)
    for method in ("gd", "agd", "tensor"):
        res = run_baseline(inst, 4, BaselineConfig(method))
        assert res.method == method and len(res.records) == 5
        assert all(len(r.row()) == len(TRACE_COLUMNS) for r in res.records)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        BaselineConfig("newton")
    with pytest.raises(InvalidArgument):
        BaselineConfig("gd", L1=0.0)
