"""Joint choice of the step size and the Taylor step.

For k >= 1 the momentum point is parametrized as
``x_theta = (1 - theta) x_k + theta y_k``, which corresponds to the step size
``lambda(theta) = (1 - theta)^2 / theta * A_k``.  With ``z_theta`` the
regularized Taylor step from ``x_theta``, the search drives

    zeta(theta) = lambda(theta) * L_p ||z_theta||^{p-1} / (p-1)!

into ``[1/2, p/(p+1)]`` by bisection on the sign of ``zeta - target``.
``zeta`` runs from +inf at theta = 0 to 0 at theta = 1, so a crossing of
the target exists inside any bracket with ``zeta(lo) > target > zeta(hi)``.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgument, LineSearchFailure
from .oracle import ProblemInstance, ProblemOracle
from .state import NAN, ATDConfig, EarlyExit, SolverState, Violation
from .subsolver import SubproblemSolution, solve_model

__all__ = ["Probe", "LineSearchResult", "zeta_value", "probe_budget",
           "eval_zeta", "find_lambda", "gap_bound", "diagnostics"]

THETA_MIN = 2.0 ** -52
THETA_MAX = 1.0 - 2.0 ** -52


@dataclass
class Probe:
    theta: float
    zeta: float
    z_norm: float
    x_tilde: np.ndarray
    gap: Optional[float] = None


@dataclass
class LineSearchResult:
    """Accepted pair, or an early exit.

    ``theta`` is NaN for the first iteration, where the momentum point is
    the origin whatever the step size.
    """

    theta: float
    lam: float
    x_tilde: np.ndarray
    y: np.ndarray
    z: np.ndarray
    zeta: float
    iterations: int
    early_exit: Optional[EarlyExit] = None
    probes: list = field(default_factory=list)
    cap: Optional[int] = None
    solution: Optional[SubproblemSolution] = None


def zeta_value(lam, z_norm, p, L):
    return lam * L * z_norm ** (p - 1) / math.factorial(p - 1)


def window(p):
    return 0.5, p / (p + 1.0)


def probe_budget(p, L, norm, epsilon):
    """Oracle calls allowed per iteration: 30 p log2 p + log2 ceil(L norm^{p+1} / eps).

    Rounded down to an integer count, never below one probe.
    """
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be positive")
    ratio = max(1, math.ceil(L * norm ** (p + 1) / epsilon))
    cap = 30 * p * math.log2(p) + math.log2(ratio)
    return max(1, int(math.floor(cap + 1e-12)))


def gap_bound(z, p, L, R):
    """Certified bound on f(x_theta + z_theta) - f* from the step length.

    ``(L (p+2) (12 p^3 + 4) R / p!) * ||z||^p``, valid whenever R >= ||x*||.
    """
    if R is None:
        raise InvalidArgument("gap bound needs a radius R >= ||x*||")
    zn = float(np.linalg.norm(z))
    return L * (p + 2) * (12 * p ** 3 + 4) * R / math.factorial(p) * zn ** p


def eval_zeta(oracle: ProblemOracle, state: SolverState, theta: float, tol_sub=1e-10):
    """zeta(theta), the step from x_theta, and x_theta (one Taylor expansion)."""
    if not 0.0 < theta < 1.0:
        raise InvalidArgument(f"theta must lie in (0, 1), got {theta}")
    if state.k < 1:
        raise InvalidArgument("zeta is only defined once A_k > 0")
    x_tilde = (1.0 - theta) * state.x + theta * state.y
    model = oracle.expand(x_tilde)
    sol = solve_model(model, oracle.lipschitz, tol_sub)
    lam = (1.0 - theta) ** 2 / theta * state.A
    zn = float(np.linalg.norm(sol.z))
    return zeta_value(lam, zn, oracle.order, oracle.lipschitz), sol, x_tilde


class _Search:
    """Probe bookkeeping shared by the branches of :func:`find_lambda`."""

    def __init__(self, instance, state, epsilon, config, cap):
        self.instance = instance
        self.oracle = instance.oracle
        self.state = state
        self.epsilon = epsilon
        self.config = config
        self.cap = cap
        self.probes = []
        self.p = self.oracle.order
        self.L = self.oracle.lipschitz

    def certified_gap(self, y, z):
        if self.instance.f_star is not None:
            return self.instance.gap(y)
        if self.config.radius is not None:
            return gap_bound(z, self.p, self.L, self.config.radius)
        return None

    def run(self, theta, x_tilde, lam):
        if self.cap is not None and len(self.probes) >= self.cap:
            raise LineSearchFailure(
                f"probe budget of {self.cap} exhausted at k={self.state.k}",
                bracket=getattr(self, "bracket", None), probes=self.probes)
        model = self.oracle.expand(x_tilde)
        sol = solve_model(model, self.L, self.config.tol_sub)
        y = x_tilde + sol.z
        zn = float(np.linalg.norm(sol.z))
        zeta = zeta_value(lam, zn, self.p, self.L)
        gap = self.certified_gap(y, sol.z)
        self.probes.append(Probe(theta, zeta, zn, x_tilde, gap))
        exit_ = None
        if zn == 0.0:
            exit_ = EarlyExit(y, 0.0 if gap is None else gap, "stationary")
        elif gap is not None and gap <= self.epsilon:
            exit_ = EarlyExit(y, gap, "gap")
        return zeta, sol, y, exit_

    def result(self, theta, lam, x_tilde, y, sol, zeta, exit_=None):
        return LineSearchResult(theta, lam, x_tilde, y, sol.z, zeta, len(self.probes),
                                exit_, self.probes, self.cap, sol)


def _theta_for_lambda(lam, A):
    """Root in (0, 1) of (1 - t)^2 / t * A = lam."""
    c = lam / A
    # smaller root of t^2 - (2 + c) t + 1, written without cancellation
    return 2.0 / ((2.0 + c) + math.sqrt(c * c + 4.0 * c))


def find_lambda(instance: ProblemInstance, state: SolverState, epsilon: float,
                config: Optional[ATDConfig] = None) -> LineSearchResult:
    """Pick ``(lambda_{k+1}, y_{k+1})`` satisfying the step window.

    Every probe is gap-tested; a probe whose certified gap (from f* when
    known, else from the radius bound) is at most ``epsilon`` ends the
    search with ``early_exit`` set.  Probe counts are capped by
    :func:`probe_budget`.

    Raises
    ------
    LineSearchFailure
        Budget exhausted; carries the last bracket and all probes.
    """
    cfg = config or ATDConfig()
    oracle = instance.oracle
    p, L = oracle.order, oracle.lipschitz
    lo_w, hi_w = window(p)
    target = 0.5 if p == 1 else cfg.target
    if p >= 2 and not lo_w < target < hi_w:
        raise InvalidArgument(f"target {target} outside ({lo_w}, {hi_w})")

    norm = instance.norm_x_star if instance.norm_x_star is not None else cfg.radius
    if cfg.max_probes_override is not None:
        cap = int(cfg.max_probes_override)
    elif norm is not None:
        cap = probe_budget(p, L, norm, epsilon)
    else:
        cap = 200
    search = _Search(instance, state, epsilon, cfg, cap)

    # certificate already below epsilon: y_k is good enough
    if state.k >= 1 and norm is not None and norm ** 2 / (2.0 * state.A) <= epsilon:
        exit_ = EarlyExit(state.y.copy(), norm ** 2 / (2.0 * state.A), "certificate")
        return LineSearchResult(NAN, NAN, state.y, state.y, np.zeros_like(state.y),
                                NAN, 0, exit_, [], cap)

    if state.k == 0:
        x_tilde = np.zeros_like(state.x)
        model = oracle.expand(x_tilde)
        sol = solve_model(model, L, cfg.tol_sub)
        zn = float(np.linalg.norm(sol.z))
        y = x_tilde + sol.z
        gap = search.certified_gap(y, sol.z)
        lam = target * math.factorial(p - 1) / (L * zn ** (p - 1)) if zn > 0 else NAN
        zeta = zeta_value(lam, zn, p, L) if zn > 0 else 0.0
        search.probes.append(Probe(NAN, zeta, zn, x_tilde, gap))
        exit_ = None
        if zn == 0.0:
            exit_ = EarlyExit(y, 0.0 if gap is None else gap, "stationary")
        elif gap is not None and gap <= epsilon:
            exit_ = EarlyExit(y, gap, "gap")
        return search.result(NAN, lam, x_tilde, y, sol, zeta, exit_)

    A = state.A

    def at(theta):
        x_tilde = (1.0 - theta) * state.x + theta * state.y
        lam = (1.0 - theta) ** 2 / theta * A
        zeta, sol, y, exit_ = search.run(theta, x_tilde, lam)
        done = exit_ is not None or lo_w <= zeta <= hi_w
        return zeta, search.result(theta, lam, x_tilde, y, sol, zeta, exit_), done

    if p == 1:
        # zeta = lambda * L_1 does not depend on the step: solve for theta directly
        theta = _theta_for_lambda(target / L, A)
        return at(theta)[1]

    theta0 = state.theta_hint if cfg.warm_start and state.theta_hint else 0.5
    zeta, res, done = at(theta0)
    if done:
        return res
    if zeta > target:
        lo, hi = theta0, None
        gap_to_one = 1.0 - theta0
        while hi is None:
            gap_to_one *= 0.5
            theta = 1.0 - gap_to_one
            if theta > THETA_MAX:
                raise LineSearchFailure("zeta stays above target as theta -> 1",
                                        bracket=(lo, theta), probes=search.probes)
            zeta, res, done = at(theta)
            if done:
                return res
            if zeta > target:
                lo = theta
            else:
                hi = theta
    else:
        lo, hi = None, theta0
        theta = theta0
        while lo is None:
            theta *= 0.5
            if theta < THETA_MIN:
                raise LineSearchFailure("zeta stays below target as theta -> 0",
                                        bracket=(theta, hi), probes=search.probes)
            zeta, res, done = at(theta)
            if done:
                return res
            if zeta > target:
                lo = theta
            else:
                hi = theta

    while True:
        search.bracket = (lo, hi)
        mid = 0.5 * (lo + hi)
        zeta, res, done = at(mid)
        if done:
            return res
        if zeta > target:
            lo = mid
        else:
            hi = mid



def diagnostics(result: LineSearchResult, state: SolverState, p: int, R: Optional[float],
                x_star: Optional[np.ndarray] = None) -> list:
    """Step-length and diameter bounds across the probes of one search.

    Checks ``||z_theta|| <= 12 p^3 R``, the speed bound
    ``| ||z_theta|| - ||z_theta'|| | <= 5 (p+1)^2 R |theta - theta'|`` between
    successive probes, and ``||x_theta - x*|| <= 4 ||x*||`` (or
    ``||x_theta|| <= 5 R`` when only R is known).  Returns the violations.
    """
    out = []
    if R is None:
        return out
    k = state.k
    probes = [pr for pr in result.probes if not math.isnan(pr.zeta)]
    tol = 1.0 + 1e-6
    for pr in probes:
        bound = 12 * p ** 3 * R
        if pr.z_norm > bound * tol:
            out.append(Violation("z_upper", k, pr.z_norm, bound))
        if x_star is not None:
            dist, bound = float(np.linalg.norm(pr.x_tilde - x_star)), 4.0 * R
        else:
            dist, bound = float(np.linalg.norm(pr.x_tilde)), 5.0 * R
        if dist > bound * tol:
            out.append(Violation("x_tilde_diameter", k, dist, bound))
    for prev, cur in zip(probes, probes[1:]):
        if math.isnan(prev.theta) or math.isnan(cur.theta):
            continue
        lhs = abs(cur.z_norm - prev.z_norm)
        rhs = 5 * (p + 1) ** 2 * R * abs(cur.theta - prev.theta)
        if lhs > rhs * tol + 1e-12:
            out.append(Violation("z_speed", k, lhs, rhs))
    return out
