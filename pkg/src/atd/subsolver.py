"""Regularized Taylor step.

Minimizes ``F(z) = f_p(c + z, c) + (L_p / p!) ||z||^{p+1}`` over the step
``z``.  The stationarity condition is

    grad_y f_p(c + z, c) + (L_p (p+1) / p!) ||z||^{p-1} z = 0,

and its residual norm is reported with every solution.

* p = 1: closed form ``z = -grad f(c) / (2 L_1)``.
* p = 2: the step solves ``(H + (3 L_2 / 2) r I) z = -g`` with ``r = ||z||``;
  a safeguarded scalar root find on ``r`` over an eigendecomposition of H.
* p >= 3: damped Newton on the convex model.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import InvalidArgument, SubsolveFailure
from .oracle import ProblemOracle, TaylorExpansion

__all__ = ["SubproblemSolution", "solve_subproblem", "solve_model",
           "solve_p2_secular", "solve_generic_newton", "regularized_value",
           "regularized_grad"]

_EPS = np.finfo(float).eps


@dataclass
class SubproblemSolution:
    z: np.ndarray
    model_value: float
    stationarity_residual: float
    inner_iterations: int


def regularized_value(model: TaylorExpansion, L: float, z: np.ndarray) -> float:
    p = model.order
    return model.value(z) + L / math.factorial(p) * float(np.linalg.norm(z)) ** (p + 1)


def regularized_grad(model: TaylorExpansion, L: float, z: np.ndarray) -> np.ndarray:
    p = model.order
    nz = float(np.linalg.norm(z))
    return model.grad(z) + L * (p + 1) / math.factorial(p) * nz ** (p - 1) * z


def _regularized_hess(model, L, z):
    p = model.order
    nz = float(np.linalg.norm(z))
    c = L / math.factorial(p)
    H = model.hess(z) + c * (p + 1) * nz ** (p - 1) * np.eye(z.size)
    if p >= 2 and nz > 0:
        H += c * (p + 1) * (p - 1) * nz ** (p - 3) * np.outer(z, z)
    return H


def _finish(model, L, z, iters, tol, scale):
    res = float(np.linalg.norm(regularized_grad(model, L, z)))
    sol = SubproblemSolution(z, regularized_value(model, L, z), res, iters)
    if res > tol * scale:
        raise SubsolveFailure(
            f"stationarity residual {res:.3e} above {tol * scale:.3e}",
            best_residual=res, z=z)
    return sol


def solve_p2_secular(grad, hess_apply, L2, tol=1e-10, max_iter=200):
    """Step of the cubic-regularized quadratic model.

    Finds ``r* >= 0`` with ``||(H + 1.5 L2 r* I)^{-1} g|| = r*`` and returns
    ``z = -(H + 1.5 L2 r* I)^{-1} g``.  ``hess_apply`` is either the dense
    Hessian or a callable ``v -> H v``.

    The bracket starts at ``[0, sqrt(4 ||g|| / (3 L2))]``; each step tries a
    Newton update on ``1/r - 1/||z(r)||`` and falls back to bisection when it
    leaves the bracket.  ``r = 0`` itself is never evaluated, so a singular
    H with ``g`` outside its range is handled by the positive shift.
    """
    g = np.asarray(grad, dtype=float)
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return np.zeros_like(g)
    if callable(hess_apply):
        H = np.column_stack([hess_apply(e) for e in np.eye(g.size)])
    else:
        H = np.asarray(hess_apply, dtype=float)
    H = 0.5 * (H + H.T)
    evals, evecs = np.linalg.eigh(H)
    # convex f: negative eigenvalues are rounding noise
    evals = np.maximum(evals, 0.0)
    gt = evecs.T @ g
    c = 1.5 * L2

    def znorm(r):
        return float(np.linalg.norm(gt / (evals + c * r)))

    lo, hi = 0.0, math.sqrt(4.0 * gnorm / (3.0 * L2))
    r = hi
    for _ in range(max_iter):
        nz = znorm(r)
        phi = nz - r
        if phi > 0:
            lo = r
        else:
            hi = r
        if phi == 0.0 or hi - lo <= 4 * _EPS * hi:
            break
        # d||z||/dr = -c sum gt^2 / (ev + c r)^3 / ||z||
        dnz = -c * float(np.sum(gt ** 2 / (evals + c * r) ** 3)) / nz
        psi = 1.0 / r - 1.0 / nz
        dpsi = -1.0 / r ** 2 + dnz / nz ** 2
        r_new = r - psi / dpsi
        if not (lo < r_new < hi):
            r_new = 0.5 * (lo + hi)
        if r_new == r:
            break
        r = r_new
    else:
        raise SubsolveFailure("secular root finding did not converge",
                              best_residual=abs(znorm(r) - r))
    return -evecs @ (gt / (evals + c * r))


def solve_generic_newton(model: TaylorExpansion, L: float, tol_sub=1e-10,
                         z0=None, max_iter=100):
    """Damped Newton with Armijo backtracking on ``F(z)``.

    The model Hessian plus the exact Hessian of the regularizer,
    ``(L/p!)[(p+1)||z||^{p-1} I + (p+1)(p-1)||z||^{p-3} z z^T]``, is positive
    definite away from ``z = 0``, so iterations start from a point on the
    steepest-descent ray scaled to balance ``||g||`` against the regularizer.
    """
    p = model.order
    g0 = model.g0
    scale = max(1.0, float(np.linalg.norm(g0)))
    if np.linalg.norm(g0) == 0.0 and z0 is None:
        return SubproblemSolution(np.zeros_like(g0), model.f0, 0.0, 0)
    F0 = model.f0
    if z0 is None:
        gn = float(np.linalg.norm(g0))
        radius = (gn * math.factorial(p) / (L * (p + 1))) ** (1.0 / p)
        z = -radius * g0 / gn
        while regularized_value(model, L, z) > F0 and radius > 0:
            radius *= 0.5
            z = -radius * g0 / gn
    else:
        z = np.array(z0, dtype=float)

    Fz = regularized_value(model, L, z)
    grad = regularized_grad(model, L, z)
    res = float(np.linalg.norm(grad))
    best = (res, z)
    iters = 0
    polish = 0
    while iters < max_iter:
        if res <= tol_sub * scale:
            # a couple of extra steps while they keep paying off
            if polish >= 2:
                break
            polish += 1
        H = _regularized_hess(model, L, z)
        try:
            step = -cho_solve(cho_factor(H), grad)
        except (LinAlgError, ValueError):
            mu = 1e-12 * (1.0 + np.linalg.norm(H, 1))
            step = -np.linalg.solve(H + mu * np.eye(z.size), grad)
        iters += 1
        slope = float(grad @ step)
        noise = 100 * _EPS * max(1.0, abs(Fz))
        t = 1.0
        accepted = False
        while t > 1e-10:
            cand = z + t * step
            Fc = regularized_value(model, L, cand)
            if Fc <= Fz + 1e-4 * t * slope:
                accepted = True
                break
            # F differences below rounding: judge by the gradient norm instead
            if abs(Fc - Fz) <= noise and \
                    np.linalg.norm(regularized_grad(model, L, cand)) < res:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        z, Fz = cand, Fc
        grad = regularized_grad(model, L, z)
        new_res = float(np.linalg.norm(grad))
        if polish and new_res >= 0.5 * res:
            res = new_res
            if res < best[0]:
                best = (res, z)
            break
        res = new_res
        if res < best[0]:
            best = (res, z)
    res, z = best
    if res > tol_sub * scale:
        raise SubsolveFailure(
            f"Newton stalled at residual {res:.3e} (target {tol_sub * scale:.3e})",
            best_residual=res, z=z)
    return SubproblemSolution(z, regularized_value(model, L, z), res, iters)


def solve_model(model: TaylorExpansion, L: float, tol_sub=1e-10) -> SubproblemSolution:
    """Minimize the regularized model for an expansion already in hand."""
    if not tol_sub > 0:
        raise InvalidArgument("tol_sub must be positive")
    p = model.order
    g = model.g0
    gnorm = float(np.linalg.norm(g))
    scale = max(1.0, gnorm)
    if gnorm == 0.0:
        return SubproblemSolution(np.zeros_like(g), model.f0, 0.0, 0)
    if p == 1:
        return _finish(model, L, -g / (2.0 * L), 0, tol_sub, scale)
    if p == 2:
        z = solve_p2_secular(g, model.hess(np.zeros_like(g)), L, tol_sub)
        res = float(np.linalg.norm(regularized_grad(model, L, z)))
        if res <= tol_sub * scale:
            return SubproblemSolution(z, regularized_value(model, L, z), res, 1)
        sol = solve_generic_newton(model, L, tol_sub, z0=z)
        sol.inner_iterations += 1
        return sol
    return solve_generic_newton(model, L, tol_sub)


def solve_subproblem(oracle: ProblemOracle, center, tol_sub=1e-10) -> SubproblemSolution:
    """One Taylor expansion at ``center`` and the regularized step from it."""
    model = oracle.expand(center)
    return solve_model(model, oracle.lipschitz, tol_sub)
