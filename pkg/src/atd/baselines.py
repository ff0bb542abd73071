"""Reference solvers sharing the ATD trace schema.

* ``run_gd``: gradient descent with step ``1/L_1``.
* ``run_agd``: the coupling of :mod:`atd.engine` with a constant step size
  ``lambda = 1/L_1`` and the explicit gradient step ``y = x~ - lambda grad f(x~)``.
* ``run_tensor``: the unaccelerated p-th order method, one regularized Taylor
  step from the current iterate per iteration.

All runs start at the origin unless ``x0`` is given.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .engine import InvariantLog, compute_a_next, dual_update, momentum_point, rate_certificate
from .errors import InvalidArgument
from .oracle import ProblemInstance, as_point
from .state import NAN, RunResult, TraceRecord
from .subsolver import solve_subproblem

__all__ = ["BaselineConfig", "METHODS", "smoothness", "run_gd", "run_agd", "run_tensor",
           "run_baseline"]

METHODS = ("gd", "agd", "tensor")


@dataclass
class BaselineConfig:
    """Step policy of a baseline.

    ``L1`` overrides the gradient-Lipschitz bound; ``radius`` is the ball
    radius used to derive it when the oracle can only bound the Hessian
    locally (defaults to ``5 ||x*||``).
    """

    method: str
    L1: Optional[float] = None
    radius: Optional[float] = None
    tol_sub: float = 1e-10

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidArgument(f"unknown baseline {self.method!r}")
        for name in ("L1", "radius", "tol_sub"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise InvalidArgument(f"{name} must be positive, got {val}")


def smoothness(instance: ProblemInstance, L1=None, radius=None) -> float:
    """Gradient-Lipschitz constant for the first-order baselines.

    Taken from, in order: the explicit ``L1``; ``L_p`` when p = 1; the
    oracle's ``local_smoothness`` over a ball of ``radius`` (or ``5 ||x*||``).
    """
    if L1 is not None:
        if not L1 > 0:
            raise InvalidArgument(f"L1 must be positive, got {L1}")
        return float(L1)
    oracle = instance.oracle
    if oracle.order == 1:
        return oracle.lipschitz
    local = getattr(oracle, "local_smoothness", None)
    if radius is None and instance.norm_x_star is not None:
        radius = 5.0 * instance.norm_x_star
    if local is None or radius is None:
        raise InvalidArgument("no gradient-Lipschitz constant: pass L1 explicitly")
    val = local(radius)
    if not val > 0:
        raise InvalidArgument("no gradient-Lipschitz constant: pass L1 explicitly")
    return float(val)


def _start(instance, x0):
    d = instance.dimension
    return np.zeros(d) if x0 is None else as_point(x0, d, "x0")


def _gap(instance, f):
    return NAN if instance.f_star is None else f - instance.f_star


def run_gd(instance: ProblemInstance, K: int, L1=None, x0=None, radius=None) -> RunResult:
    """``x_{k+1} = x_k - grad f(x_k) / L_1``."""
    _check_K(K)
    L = smoothness(instance, L1, radius)
    oracle = instance.oracle
    base = oracle.calls
    x = _start(instance, x0)
    f = oracle.value(x)
    records = [TraceRecord(0, gap=_gap(instance, f), oracle_calls_cum=0)]
    for k in range(1, K + 1):
        g = oracle.gradient(x)
        x_new = x - g / L
        f = oracle.value(x_new)
        records.append(TraceRecord(k, gap=_gap(instance, f), lambda_k=1.0 / L,
                                   step_norm=float(np.linalg.norm(x_new - x)),
                                   oracle_calls_cum=oracle.calls - base))
        x = x_new
    return RunResult("gd", records, [], history={"final": x})


def run_agd(instance: ProblemInstance, K: int, L1=None, step=None, x0=None,
            radius=None) -> RunResult:
    """Accelerated gradient descent as the coupling with constant ``lambda``.

    Two gradient queries per iteration, at ``x~_k`` and at ``y_{k+1}``.
    ``step`` overrides ``lambda = 1/L_1``.
    """
    _check_K(K)
    oracle = instance.oracle
    if step is None:
        lam = 1.0 / smoothness(instance, L1, radius)
    else:
        if not step > 0:
            raise InvalidArgument("step must be positive")
        lam = float(step)
    base = oracle.calls
    x = _start(instance, x0)
    y = x.copy()
    A = 0.0
    f = oracle.value(y)
    norm = None
    if instance.x_star is not None:
        norm = float(np.linalg.norm(instance.x_star - x))
    records = [TraceRecord(0, gap=_gap(instance, f), A_k=0.0, oracle_calls_cum=0)]
    for k in range(1, K + 1):
        a, A_new = compute_a_next(lam, A)
        x_tilde = momentum_point(A, a, y, x)
        y = x_tilde - lam * oracle.gradient(x_tilde)
        x = dual_update(x, a, oracle.gradient(y))
        A = A_new
        f = oracle.value(y)
        records.append(TraceRecord(
            k, gap=_gap(instance, f), A_k=A, lambda_k=lam, a_k=a,
            step_norm=float(np.linalg.norm(y - x_tilde)),
            oracle_calls_cum=oracle.calls - base,
            certificate=NAN if norm is None else rate_certificate(A, norm)))
    return RunResult("agd", records, [], history={"final": y})


def run_tensor(instance: ProblemInstance, K: int, x0=None, tol_sub=1e-10,
               strict=False) -> RunResult:
    """``y_{k+1} = y_k + argmin_z {f_p(y_k + z, y_k) + (L_p/p!) ||z||^{p+1}}``.

    Each step can only lower f, which is checked as ``monotone``.
    """
    _check_K(K)
    oracle = instance.oracle
    if oracle.order < 2:
        raise InvalidArgument("the tensor baseline needs p >= 2")
    log = InvariantLog(strict)
    base = oracle.calls
    y = _start(instance, x0)
    f = oracle.value(y)
    records = [TraceRecord(0, gap=_gap(instance, f), oracle_calls_cum=0)]
    for k in range(1, K + 1):
        sol = solve_subproblem(oracle, y, tol_sub)
        y_new = y + sol.z
        f_new = oracle.value(y_new)
        log.le("monotone", k, f_new, f, abs_=1e-14 * max(1.0, abs(f)))
        records.append(TraceRecord(k, gap=_gap(instance, f_new),
                                   step_norm=float(np.linalg.norm(sol.z)),
                                   oracle_calls_cum=oracle.calls - base))
        y, f = y_new, f_new
    return RunResult("tensor", records, log.violations, history={"final": y},
                     checks=log.checks)


def run_baseline(instance: ProblemInstance, K: int, config: BaselineConfig) -> RunResult:
    if config.method == "gd":
        return run_gd(instance, K, config.L1, radius=config.radius)
    if config.method == "agd":
        return run_agd(instance, K, config.L1, radius=config.radius)
    return run_tensor(instance, K, tol_sub=config.tol_sub)


def _check_K(K):
    if int(K) != K or K < 1:
        raise InvalidArgument("K must be an integer >= 1")
