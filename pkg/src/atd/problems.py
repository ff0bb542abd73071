"""Test objectives with known minimizers.

Two structural families are provided:

* ridge sums ``f(x) = sum_i w_i phi(a_i . x - b_i)`` with a scalar profile
  ``phi`` (power ``|t|^q / q`` or ``log cosh t``), whose Taylor data reduce to
  scalar derivatives of ``phi`` along the rows;
* log-sum-exp ``f(x) = log sum_i exp(a_i . x - b_i)``, whose Taylor
  coefficients along a direction are the cumulants of ``A h`` under the
  softmax weights.

Every planted instance puts the minimum-norm minimizer at a chosen distance
from the origin, the start point of all solvers.
"""

import math

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import InvalidArgument
from .oracle import ProblemInstance, ProblemOracle, TaylorExpansion, sample_pairs

FAMILIES = ("power", "logsumexp", "logcosh")


# -- scalar profiles ------------------------------------------------------------

class PowerProfile:
    """phi(t) = |t|^q / q for an integer q >= 2."""

    def __init__(self, q: int):
        if int(q) != q or q < 2:
            raise InvalidArgument(f"power exponent must be an integer >= 2, got {q}")
        self.q = int(q)

    def derivatives(self, r: np.ndarray, upto: int) -> np.ndarray:
        q = self.q
        out = np.zeros((upto + 1, r.size))
        out[0] = np.abs(r) ** q / q
        # |t|^{q-j} sign(t)^j == t^{q-j} for even q and sign(t) t^{q-j} for odd q
        parity = 1.0 if q % 2 == 0 else np.sign(r)
        coef = 1.0
        for j in range(1, upto + 1):
            if j > 1:
                coef *= q - j + 1
            if coef == 0.0:
                break
            out[j] = coef * parity * r ** (q - j)
        return out

    def lipschitz_of_derivative(self, p: int) -> float:
        """Lipschitz constant of phi^(p) on the whole line."""
        if self.q == p + 1:
            return float(math.factorial(p))
        if self.q <= p and self.q % 2 == 0:
            return 0.0
        return math.inf


class LogCoshProfile:
    """phi(t) = log cosh t."""

    # sup |phi^(j)| for j = 2, 3, 4
    _SUP = {2: 1.0, 3: 4.0 / (3.0 * math.sqrt(3.0)), 4: 2.0}

    def derivatives(self, r: np.ndarray, upto: int) -> np.ndarray:
        if upto > 3:
            raise InvalidArgument("log-cosh profile supports order p <= 3")
        out = np.zeros((upto + 1, r.size))
        a = np.abs(r)
        small = a < 1.0
        # log1p(2 sinh^2(t/2)) keeps full relative accuracy near t = 0
        out[0] = np.where(small, np.log1p(2.0 * np.sinh(0.5 * np.minimum(a, 1.0)) ** 2),
                          a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0))
        t = np.tanh(r)
        s2 = 1.0 - t * t
        derivs = [t, s2, -2.0 * t * s2]
        for j in range(1, upto + 1):
            out[j] = derivs[j - 1]
        return out

    def lipschitz_of_derivative(self, p: int) -> float:
        if p > 3:
            raise InvalidArgument("log-cosh profile supports order p <= 3")
        return self._SUP[p + 1]


# -- ridge oracle -----------------------------------------------------------------

class RidgeExpansion(TaylorExpansion):
    def __init__(self, center, order, A, derivs):
        self.A = A
        # d_j / j! folded in once; derivs has shape (order + 1, m)
        self.coef = derivs / np.array(
            [math.factorial(j) for j in range(order + 1)])[:, None]
        super().__init__(center, order, derivs[0].sum(), A.T @ derivs[1] if order >= 1 else None)

    def _powers(self, s):
        return np.vstack([s ** j for j in range(self.order + 1)])

    def value(self, h):
        s = self.A @ h
        return float(np.sum(self.coef * self._powers(s)))

    def grad(self, h):
        s = self.A @ h
        P = self._powers(s)
        j = np.arange(1, self.order + 1)[:, None]
        return self.A.T @ np.sum(j * self.coef[1:] * P[:-1], axis=0)

    def _curvature(self, h):
        p = self.order
        if p < 2:
            return np.zeros(self.A.shape[0])
        s = self.A @ h
        P = self._powers(s)
        j = np.arange(2, p + 1)[:, None]
        return np.sum(j * (j - 1) * self.coef[2:] * P[:-2], axis=0)

    def hess(self, h):
        c = self._curvature(h)
        return (self.A.T * c) @ self.A

    def hess_apply(self, h, v):
        return self.A.T @ (self._curvature(h) * (self.A @ v))


class RidgeOracle(ProblemOracle):
    """f(x) = sum_i w_i phi(a_i . x - b_i).

    When ``lipschitz`` is omitted it is taken as
    ``Lip(phi^(p)) * sum_i w_i ||a_i||^{p+1}``, which bounds the Lipschitz
    constant of the p-th derivative tensor in operator norm.
    """

    def __init__(self, A, b, order, profile, weights=None, lipschitz=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise InvalidArgument("A and b disagree on the number of rows")
        w = np.ones(b.size) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
        if w.size != b.size or np.any(w <= 0):
            raise InvalidArgument("weights must be positive, one per row")
        self.profile = profile
        self.weights = w
        self.A = A
        self.b = b
        if lipschitz is None:
            lip = profile.lipschitz_of_derivative(order)
            lipschitz = lip * float(np.sum(w * np.linalg.norm(A, axis=1) ** (order + 1)))
        super().__init__(order, A.shape[1], lipschitz)

    def _residual(self, x):
        return self.A @ x - self.b

    def _value(self, x):
        return float(np.sum(self.weights * self.profile.derivatives(self._residual(x), 0)[0]))

    def _gradient(self, x):
        d = self.profile.derivatives(self._residual(x), 1)
        return self.A.T @ (self.weights * d[1])

    def hessian(self, x):
        d = self.profile.derivatives(self._residual(x), 2)
        return (self.A.T * (self.weights * d[2])) @ self.A

    def _expand(self, x, order):
        derivs = self.profile.derivatives(self._residual(x), order) * self.weights
        return RidgeExpansion(x, order, self.A, derivs)

    def local_smoothness(self, radius: float) -> float:
        """Bound on ||Hessian|| over the ball ``||x|| <= radius``."""
        reach = np.abs(self.b) + np.linalg.norm(self.A, axis=1) * radius
        if isinstance(self.profile, PowerProfile):
            q = self.profile.q
            curv = (q - 1) * reach ** (q - 2)
        else:
            curv = np.ones_like(reach)
        return float(np.sum(self.weights * curv * np.linalg.norm(self.A, axis=1) ** 2))


# -- log-sum-exp oracle ------------------------------------------------------------

class LogSumExpExpansion(TaylorExpansion):
    def __init__(self, center, order, A, w, f0):
        self.A = A
        self.w = w
        super().__init__(center, order, f0, A.T @ w)

    def _centered(self, h):
        s = self.A @ h
        return s - self.w @ s

    def value(self, h):
        s = self.A @ h
        w = self.w
        mu = w @ s
        total = self.f0 + mu
        if self.order >= 2:
            c = s - mu
            total += 0.5 * (w @ c ** 2)
            if self.order >= 3:
                total += (w @ c ** 3) / 6.0
        return float(total)

    def grad(self, h):
        w = self.w
        coeff = w.copy()
        if self.order >= 2:
            c = self._centered(h)
            coeff += w * c
            if self.order >= 3:
                coeff += 0.5 * w * (c ** 2 - w @ c ** 2)
        return self.A.T @ coeff

    def hess(self, h):
        A, w = self.A, self.w
        d = A.shape[1]
        if self.order < 2:
            return np.zeros((d, d))
        Aw = A.T @ w
        H = (A.T * w) @ A - np.outer(Aw, Aw)
        if self.order >= 3:
            wc = w * self._centered(h)
            u = A.T @ wc
            H += (A.T * wc) @ A - np.outer(u, Aw) - np.outer(Aw, u)
        return H


class LogSumExpOracle(ProblemOracle):
    """f(x) = log sum_i exp(a_i . x - b_i), expansions up to order 3."""

    def __init__(self, A, b, order, lipschitz):
        if order > 3:
            raise InvalidArgument("log-sum-exp oracle supports order p <= 3")
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        super().__init__(order, self.A.shape[1], lipschitz)

    def _value(self, x):
        return float(logsumexp(self.A @ x - self.b))

    def _gradient(self, x):
        return self.A.T @ softmax(self.A @ x - self.b)

    def hessian(self, x):
        w = softmax(self.A @ x - self.b)
        Aw = self.A.T @ w
        return (self.A.T * w) @ self.A - np.outer(Aw, Aw)

    def local_smoothness(self, radius: float) -> float:
        """Bound on ||Hessian||, valid everywhere: the Hessian is a covariance of rows."""
        return float(np.max(np.sum(self.A ** 2, axis=1)))

    def _expand(self, x, order):
        r = self.A @ x - self.b
        return LogSumExpExpansion(x, order, self.A, softmax(r), logsumexp(r))


# -- constructors ---------------------------------------------------------------

def _check_sizes(d, m, p):
    for name, val in (("d", d), ("m", m), ("p", p)):
        if int(val) != val or val < 1:
            raise InvalidArgument(f"{name} must be an integer >= 1, got {val}")


def _planted_point(rng, A, target_norm):
    """Random point of norm ``target_norm`` in the row space of ``A``."""
    d = A.shape[1]
    if target_norm < 0:
        raise InvalidArgument("target_norm must be >= 0")
    if target_norm == 0:
        return np.zeros(d)
    u = rng.standard_normal(d)
    _, sv, vt = np.linalg.svd(A, full_matrices=False)
    basis = vt[sv > 1e-12 * sv[0]]
    u = basis.T @ (basis @ u)
    return target_norm * u / np.linalg.norm(u)


def _descriptor(family, d, m, p, seed, target_norm):
    return {"family": family, "d": int(d), "m": int(m), "p": int(p),
            "seed": int(seed), "target_norm": float(target_norm)}


def make_power_regression(d, m, p, seed, target_norm=1.0):
    """Planted power regression ``(1/(p+1)) sum_i |a_i . x - b_i|^{p+1}``.

    Rows are Gaussian with unit expected norm; ``b = A x*`` so ``f* = 0``.
    """
    _check_sizes(d, m, p)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, d)) / math.sqrt(d)
    x_star = _planted_point(rng, A, target_norm)
    b = A @ x_star
    oracle = RidgeOracle(A, b, p, PowerProfile(p + 1))
    return ProblemInstance(oracle, x_star=x_star, f_star=0.0,
                           descriptor=_descriptor("power", d, m, p, seed, target_norm))


def make_logcosh_regression(d, m, p, seed, target_norm=1.0):
    """Planted ``sum_i log cosh(a_i . x - b_i)`` with ``f* = 0``."""
    _check_sizes(d, m, p)
    if p > 3:
        raise InvalidArgument("log-cosh family supports p <= 3")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, d)) / math.sqrt(d)
    x_star = _planted_point(rng, A, target_norm)
    oracle = RidgeOracle(A, A @ x_star, p, LogCoshProfile())
    return ProblemInstance(oracle, x_star=x_star, f_star=0.0,
                           descriptor=_descriptor("logcosh", d, m, p, seed, target_norm))


def newton_minimize(oracle, x0, tol=1e-12, max_iter=100):
    """Damped Newton on f using exact Hessians; returns (x, ||grad||)."""
    x = np.array(x0, dtype=float)
    for _ in range(max_iter):
        g = oracle.peek_gradient(x)
        gn = float(np.linalg.norm(g))
        if gn <= tol:
            break
        H = oracle.hessian(x)
        step = np.linalg.lstsq(H, -g, rcond=None)[0]
        f0, t = oracle.peek_value(x), 1.0
        while t > 1e-12 and oracle.peek_value(x + t * step) > f0 + 1e-4 * t * (g @ step):
            t *= 0.5
        x = x + t * step
    return x, float(np.linalg.norm(oracle.peek_gradient(x)))


def estimate_lipschitz(oracle, samples=400, seed=0, radius=2.0, safety=2.0):
    """Sampled estimate of L_p from Taylor remainders, times ``safety``."""
    p = oracle.order
    worst = 0.0
    for x, y in sample_pairs(oracle.dimension, samples, seed, radius):
        model = oracle.peek_expansion(x)
        h = y - x
        r = float(np.linalg.norm(h))
        val = abs(oracle.peek_value(y) - model.value(h)) * math.factorial(p + 1) / r ** (p + 1)
        grd = float(np.linalg.norm(oracle.peek_gradient(y) - model.grad(h))) \
            * math.factorial(p) / r ** p
        worst = max(worst, val, grd)
    return safety * worst


def logsumexp_instance(A, b, p, lipschitz=None, x0=None, seed=0, radius=None,
                       f_star=None):
    """Log-sum-exp instance with x* found by Newton to 1e-12 gradient norm.

    ``f_star`` may be passed when it is known in closed form; it is still
    checked against f(x*).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[0] < 2:
        raise InvalidArgument("log-sum-exp with a single row is affine and unbounded below")
    probe = LogSumExpOracle(A, b, p, 1.0)
    x_star, gnorm = newton_minimize(probe, np.zeros(A.shape[1]) if x0 is None else x0)
    if not gnorm <= 1e-12:
        raise InvalidArgument(f"no minimizer found (gradient norm {gnorm:.3g})")
    # minimum-norm representative
    _, sv, vt = np.linalg.svd(A - A.mean(axis=0), full_matrices=False)
    basis = vt[sv > 1e-12 * sv[0]]
    x_star = basis.T @ (basis @ x_star)
    if lipschitz is None:
        rad = radius if radius is not None else 5.0 * max(1.0, float(np.linalg.norm(x_star)))
        lipschitz = estimate_lipschitz(probe, seed=seed, radius=rad)
    oracle = LogSumExpOracle(A, b, p, lipschitz)
    if f_star is None:
        f_star = oracle.peek_value(x_star)
    return ProblemInstance(oracle, x_star=x_star, f_star=f_star)


def make_logsumexp(d, m, p, seed, target_norm=1.0):
    """Planted log-sum-exp instance.

    Rows are re-centered so a seeded softmax weighting of them sums to zero,
    which makes ``x*`` stationary once ``b = A x* - log w``; then ``f* = 0``.
    """
    _check_sizes(d, m, p)
    if m < 2:
        raise InvalidArgument("log-sum-exp with a single row is affine and unbounded below")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, d)) / math.sqrt(d)
    w = softmax(0.5 * rng.standard_normal(m))
    A = A - w @ A
    x_star = _planted_point(rng, A, target_norm)
    b = A @ x_star - np.log(w)
    inst = logsumexp_instance(A, b, p, x0=x_star, seed=seed,
                              radius=5.0 * max(1.0, target_norm), f_star=0.0)
    inst.descriptor = _descriptor("logsumexp", d, m, p, seed, target_norm)
    return inst


def make_instance(family, d, m, p, seed, target_norm=1.0):
    makers = {"power": make_power_regression, "logsumexp": make_logsumexp,
              "logcosh": make_logcosh_regression}
    if family not in makers:
        raise InvalidArgument(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    return makers[family](d, m, p, seed, target_norm)
