"""Accelerated Taylor descent driven by an accelerated proximal-point coupling.

Sequences: ``lambda_k A_k = a_k^2``, ``A_{k+1} = A_k + a_{k+1}``, momentum
point ``x~_k = (A_k y_k + a_{k+1} x_k) / A_{k+1}``, dual iterate
``x_{k+1} = x_k - a_{k+1} grad f(y_{k+1})``.  The estimate-sequence
potential ``psi_k(x_k) - A_k f(y_k)`` is carried incrementally, and every
provable inequality of the method is checked as the run proceeds.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgument, InvariantViolation
from .line_search import diagnostics, find_lambda, window, zeta_value
from .oracle import ProblemInstance, true_gradient
from .state import (NAN, ATDConfig, CompensatedSum, RunResult, SolverState, TraceRecord, Violation,
                    rate_constant)

__all__ = ["compute_a_next", "momentum_point", "dual_update", "potential_increment",
           "rate_certificate", "rate_bound", "a_floor", "run_atd", "replay_dual",
           "replay_potential", "InvariantLog"]

REL = 1e-6


def compute_a_next(lambda_next, A):
    """Positive root of ``a^2 - lambda a - lambda A = 0`` and the new ``A``."""
    if not lambda_next > 0:
        raise InvalidArgument(f"lambda must be positive, got {lambda_next}")
    if A < 0:
        raise InvalidArgument(f"A must be nonnegative, got {A}")
    a = (lambda_next + math.sqrt(lambda_next * lambda_next + 4.0 * lambda_next * A)) / 2.0
    return a, A + a


def momentum_point(A, a_next, y, x):
    A_next = A + a_next
    if not A_next > 0:
        raise InvalidArgument("A + a_next must be positive")
    y, x = np.asarray(y, dtype=float), np.asarray(x, dtype=float)
    if y.shape != x.shape:
        raise InvalidArgument("x and y differ in shape")
    return (A / A_next) * y + (a_next / A_next) * x


def dual_update(x, a_next, grad_y_next):
    return np.asarray(x, dtype=float) - a_next * np.asarray(grad_y_next, dtype=float)


@dataclass
class PotentialStep:
    psi: float
    potential: float
    increment: float
    lower_bound: float


def potential_increment(state: SolverState, lambda_next, x_next, y_next, a_next, x_tilde,
                        *, f_next, grad_next) -> PotentialStep:
    """New ``psi_{k+1}(x_{k+1}) - A_{k+1} f(y_{k+1})`` from the current state.

    Uses ``psi_{k+1}(x) = psi_k(x_k) + a f_1(x, y_{k+1}) + ||x - x_k||^2 / 2``
    and reports the guaranteed lower bound on the increment,
    ``(A_{k+1} / 2 lambda) (||y - x~||^2 - ||y - (x~ - lambda grad f(y))||^2)``.
    Does not mutate ``state``.
    """
    A_next = state.A + a_next
    lin = f_next + float(grad_next @ (x_next - y_next))
    dx = x_next - state.x
    psi_terms = [state.psi.value, a_next * lin, 0.5 * float(dx @ dx)]
    psi_next = math.fsum(psi_terms)
    potential = math.fsum(psi_terms + [-A_next * f_next])
    increment = math.fsum(psi_terms + [-A_next * f_next, -state.psi.value, state.A * state.f_y])
    step = y_next - x_tilde
    implicit = y_next - (x_tilde - lambda_next * grad_next)
    bound = A_next / (2.0 * lambda_next) * (float(step @ step) - float(implicit @ implicit))
    return PotentialStep(psi_next, potential, increment, bound)


def rate_certificate(A, norm_x_star):
    """``||x*||^2 / (2 A)``: upper bound on f(y_k) - f*."""
    if not A > 0:
        raise InvalidArgument("A must be positive")
    return norm_x_star ** 2 / (2.0 * A)


def rate_bound(k, p, L, norm_x_star):
    """``c_p L_p ||x*||^{p+1} / k^{(3p+1)/2}``."""
    return rate_constant(p) * L * norm_x_star ** (p + 1) / k ** ((3 * p + 1) / 2)


def a_floor(k, p, L, norm_x_star):
    """``k^{(3p+1)/2} / (c_p L_p ||x*||^{p-1})``, the guaranteed growth of A_k."""
    return k ** ((3 * p + 1) / 2) / (rate_constant(p) * L * norm_x_star ** (p - 1))


class InvariantLog:
    """Collects violations; raises immediately in strict mode."""

    def __init__(self, strict=False):
        self.strict = strict
        self.violations = []
        self.checks = {}

    def check(self, kind, k, lhs, rhs, ok):
        self.checks[kind] = self.checks.get(kind, 0) + 1
        if not ok:
            self.record(Violation(kind, k, float(lhs), float(rhs)))

    def le(self, kind, k, lhs, rhs, rel=0.0, abs_=0.0):
        self.check(kind, k, lhs, rhs, lhs <= rhs * (1.0 + rel) + abs_)

    def ge(self, kind, k, lhs, rhs, rel=0.0, abs_=0.0):
        self.check(kind, k, lhs, rhs, lhs >= rhs * (1.0 - rel) - abs_)

    def record(self, violation):
        self.violations.append(violation)
        if self.strict:
            raise InvariantViolation(violation)


def _row_calls(oracle, base):
    return oracle.calls - base


def run_atd(instance: ProblemInstance, K: int, epsilon: float,
            config: Optional[ATDConfig] = None) -> RunResult:
    """Run K iterations from ``x_0 = y_0 = 0``.

    Returns one trace row per iterate (row 0 is the start point).  The run
    ends early when the step search certifies a gap of at most ``epsilon``;
    the certified point is then in ``result.early_exit``.
    """
    if int(K) != K or K < 1:
        raise InvalidArgument("K must be an integer >= 1")
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be positive")
    cfg = config or ATDConfig()
    oracle = instance.oracle
    p, L, d = oracle.order, oracle.lipschitz, oracle.dimension
    norm = instance.norm_x_star if instance.norm_x_star is not None else cfg.radius
    f_star = instance.f_star
    x_star = instance.x_star
    base = oracle.calls
    log = InvariantLog(cfg.strict)

    f0 = oracle.value(np.zeros(d))
    state = SolverState.initial(d, f0)
    records = [TraceRecord(0, gap=NAN if f_star is None else f0 - f_star,
                           A_k=0.0, potential=0.0,
                           oracle_calls_cum=_row_calls(oracle, base))]
    history = {"y": [state.y.copy()], "x": [state.x.copy()], "grad": [], "a": [],
               "lambda": [], "x_tilde": []} if cfg.keep_history else None
    result = RunResult("atd", records, log.violations, state=state, history=history,
                       checks=log.checks)
    lo_w, hi_w = window(p)

    for _ in range(K):
        ls = find_lambda(instance, state, epsilon, cfg)
        result.probe_cap = ls.cap
        k_next = state.k + 1
        log.le("probe_budget", k_next, ls.iterations, ls.cap)
        if norm is not None:
            for kind in ("z_upper", "x_tilde_diameter", "z_speed"):
                log.checks[kind] = log.checks.get(kind, 0) + 1
        for v in diagnostics(ls, state, p, norm, x_star):
            log.record(v)
        if ls.early_exit is not None:
            ls.early_exit.probes = ls.iterations
            result.early_exit = ls.early_exit
            break

        lam, y_next, x_tilde = ls.lam, ls.y, ls.x_tilde
        a_next, A_next = compute_a_next(lam, state.A)
        g_next = true_gradient(oracle, y_next)
        x_next = dual_update(state.x, a_next, g_next)
        f_next = oracle.value(y_next)
        step = potential_increment(state, lam, x_next, y_next, a_next, x_tilde,
                                   f_next=f_next, grad_next=g_next)
        scale = max(1.0, abs(state.A * state.f_y), abs(A_next * f_next),
                    abs(a_next * f_next), abs(step.psi))
        log.ge("potential_increment", k_next, step.increment, step.lower_bound,
               abs_=1e-8 * scale)

        step_norm = float(np.linalg.norm(y_next - x_tilde))
        zeta = zeta_value(lam, step_norm, p, L)
        log.check("coupling", k_next, abs(lam * A_next - a_next ** 2), 1e-9 * a_next ** 2,
                  abs(lam * A_next - a_next ** 2) <= 1e-9 * a_next ** 2)
        log.check("step_window", k_next, zeta, (lo_w, hi_w)[zeta > hi_w],
                  lo_w - 1e-9 <= zeta <= hi_w + 1e-9)
        implicit = float(np.linalg.norm(y_next - (x_tilde - lam * g_next)))
        log.le("implicit_step", k_next, implicit,
               0.5 * step_norm + 10 * cfg.tol_sub * max(1.0, lam))

        # advance
        state.psi = CompensatedSum(step.psi)
        state.tradeoff.add(A_next / lam * step_norm ** 2)
        state.k, state.A, state.x, state.y, state.f_y = k_next, A_next, x_next, y_next, f_next
        state.lambda_history.append(lam)
        state.a_history.append(a_next)
        state.sqrt_lambda_sum += math.sqrt(lam)
        if not math.isnan(ls.theta):
            state.theta_hint = ls.theta
        if history is not None:
            for key, val in (("y", y_next), ("x", x_next), ("grad", g_next), ("a", a_next),
                             ("lambda", lam), ("x_tilde", x_tilde)):
                history[key].append(val)

        potential = state.potential
        log.ge("potential_nonneg", k_next, potential, 0.0,
               abs_=1e-8 * max(1.0, abs(A_next * f_next)))
        log.ge("A_estimate", k_next, A_next, 0.25 * state.sqrt_lambda_sum ** 2, rel=1e-9)

        gap = NAN if f_star is None else f_next - f_star
        cert = NAN
        if norm is not None:
            cert = rate_certificate(A_next, norm)
            log.le("tradeoff_budget", k_next, state.tradeoff_sum, 4.0 / 3.0 * norm ** 2, rel=REL)
            if p >= 2:
                log.ge("A_floor", k_next, A_next, a_floor(k_next, p, L, norm), rel=REL)
        if x_star is not None:
            log.le("x_diameter", k_next, float(np.linalg.norm(x_next - x_star)), norm, rel=REL)
            log.le("y_diameter", k_next, float(np.linalg.norm(y_next - x_star)), 4 * norm, rel=REL)
        if f_star is not None and norm is not None:
            log.le("certificate", k_next, gap, cert, rel=REL)
            log.le("rate", k_next, gap, rate_bound(k_next, p, L, norm), rel=REL)

        records.append(TraceRecord(
            k_next, gap=gap, A_k=A_next, lambda_k=lam, a_k=a_next, zeta_k=zeta,
            step_norm=step_norm, oracle_calls_cum=_row_calls(oracle, base),
            bisect_iters=ls.iterations, potential=potential, certificate=cert))
    return result


def replay_dual(history):
    """``-sum_i a_i grad f(y_i)`` rebuilt from a stored history."""
    total = np.zeros_like(history["y"][0])
    for a, g in zip(history["a"], history["grad"]):
        total = total - a * g
    return total


def replay_potential(oracle, history):
    """``psi_K(x_K) - A_K f(y_K)`` evaluated directly from the stored points."""
    x = history["x"][-1]
    terms = [0.5 * float(x @ x)]
    for a, y, g in zip(history["a"], history["y"][1:], history["grad"]):
        terms.append(a * (oracle.peek_value(y) + float(g @ (x - y))))
    A = math.fsum(history["a"])
    terms.append(-A * oracle.peek_value(history["y"][-1]))
    return math.fsum(terms)
