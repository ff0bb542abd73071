"""p-th order Taylor-expansion oracles.

An oracle represents a convex ``f`` together with the order ``p`` of the
expansions it hands out and a constant ``L_p`` bounding the Lipschitz
constant of the p-th derivative.  Expansion data is exposed through
applicators (value, gradient, Hessian at a displacement from the center)
rather than materialized derivative tensors.

Call accounting follows the oracle model: all queries of the degree-p
expansion around one center cost a single call, so the Taylor counter only
moves when the center changes.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgument, ValidationFailure

__all__ = [
    "TaylorExpansion",
    "ProblemOracle",
    "ProblemInstance",
    "as_point",
    "taylor_value",
    "taylor_grad",
    "taylor_hess_apply",
    "true_gradient",
    "validate_oracle",
]


def as_point(x, dim: int, name: str = "x") -> np.ndarray:
    """Coerce ``x`` to a finite float vector of length ``dim``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise InvalidArgument(f"{name} has shape {arr.shape}, expected ({dim},)")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name} has non-finite entries")
    return arr


class TaylorExpansion:
    """Degree-p Taylor model ``h -> f_p(center + h, center)``.

    Subclasses implement ``value``, ``grad`` and ``hess`` as functions of the
    displacement ``h``.
    """

    def __init__(self, center: np.ndarray, order: int, f0: float, g0: np.ndarray):
        self.center = center
        self.order = order
        self.f0 = float(f0)
        self.g0 = g0

    def value(self, h: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, h: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, h: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_apply(self, h: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.hess(h) @ v


class ProblemOracle:
    """Base class for Taylor oracles.

    Parameters
    ----------
    order : int
        Expansion order p >= 1.
    dimension : int
        Ambient dimension d.
    lipschitz : float
        L_p, a Lipschitz constant of the p-th derivative.
    """

    def __init__(self, order: int, dimension: int, lipschitz: float):
        if int(order) != order or order < 1:
            raise InvalidArgument(f"order must be an integer >= 1, got {order}")
        if int(dimension) != dimension or dimension < 1:
            raise InvalidArgument(f"dimension must be an integer >= 1, got {dimension}")
        if not (lipschitz > 0 and math.isfinite(lipschitz)):
            raise InvalidArgument(f"lipschitz must be positive and finite, got {lipschitz}")
        self.order = int(order)
        self.dimension = int(dimension)
        self.lipschitz = float(lipschitz)
        self.counts = {"taylor": 0, "gradient": 0, "value": 0}
        self._lock = threading.Lock()
        self._last: Optional[TaylorExpansion] = None

    # -- subclass hooks -----------------------------------------------------

    def _value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _expand(self, x: np.ndarray, order: int) -> TaylorExpansion:
        raise NotImplementedError

    # -- counted queries ----------------------------------------------------

    @property
    def calls(self) -> int:
        """Taylor expansions plus gradient queries."""
        return self.counts["taylor"] + self.counts["gradient"]

    def reset_counts(self) -> None:
        with self._lock:
            for key in self.counts:
                self.counts[key] = 0
            self._last = None

    def expand(self, x) -> TaylorExpansion:
        """Expansion at ``x``; one oracle call unless ``x`` is the last center."""
        x = as_point(x, self.dimension)
        with self._lock:
            last = self._last
            if last is not None and np.array_equal(last.center, x):
                return last
            self.counts["taylor"] += 1
        expansion = self._expand(x.copy(), self.order)
        with self._lock:
            self._last = expansion
        return expansion

    def value(self, x) -> float:
        x = as_point(x, self.dimension)
        with self._lock:
            self.counts["value"] += 1
        return float(self._value(x))

    def gradient(self, x) -> np.ndarray:
        x = as_point(x, self.dimension)
        with self._lock:
            self.counts["gradient"] += 1
        return self._gradient(x)

    # -- uncounted helpers used by validators and diagnostics ---------------

    def peek_value(self, x) -> float:
        return float(self._value(as_point(x, self.dimension)))

    def peek_gradient(self, x) -> np.ndarray:
        return self._gradient(as_point(x, self.dimension))

    def peek_expansion(self, x, order: Optional[int] = None) -> TaylorExpansion:
        return self._expand(as_point(x, self.dimension), order or self.order)

    def with_lipschitz(self, lipschitz: float) -> "ProblemOracle":
        """Shallow copy carrying a different L_p (fresh counters)."""
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        ProblemOracle.__init__(clone, self.order, self.dimension, lipschitz)
        return clone


def taylor_value(oracle: ProblemOracle, x, y) -> float:
    """f_p(y, x)."""
    model = oracle.expand(x)
    y = as_point(y, oracle.dimension, "y")
    return model.value(y - model.center)


def taylor_grad(oracle: ProblemOracle, x, y) -> np.ndarray:
    """Gradient in ``y`` of f_p(y, x)."""
    model = oracle.expand(x)
    y = as_point(y, oracle.dimension, "y")
    return model.grad(y - model.center)


def taylor_hess_apply(oracle: ProblemOracle, x, y, v) -> np.ndarray:
    """Hessian in ``y`` of f_p(y, x), applied to ``v``."""
    model = oracle.expand(x)
    y = as_point(y, oracle.dimension, "y")
    v = as_point(v, oracle.dimension, "v")
    return model.hess_apply(y - model.center, v)


def true_gradient(oracle: ProblemOracle, y) -> np.ndarray:
    """Exact gradient of f at ``y`` (counted as a gradient query)."""
    return oracle.gradient(y)


@dataclass
class ProblemInstance:
    """An oracle plus whatever is known about its minimizer.

    ``norm_x_star`` is measured from the origin, which is where every solver
    in this package starts.
    """

    oracle: ProblemOracle
    x_star: Optional[np.ndarray] = None
    f_star: Optional[float] = None
    norm_x_star: Optional[float] = None
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.x_star is not None:
            self.x_star = as_point(self.x_star, self.oracle.dimension, "x_star")
            norm = float(np.linalg.norm(self.x_star))
            if self.norm_x_star is None:
                self.norm_x_star = norm
            elif not math.isclose(self.norm_x_star, norm, rel_tol=1e-12, abs_tol=1e-15):
                raise InvalidArgument("norm_x_star disagrees with ||x_star||")
            f_at = self.oracle.peek_value(self.x_star)
            if self.f_star is None:
                self.f_star = f_at
            elif abs(f_at - self.f_star) > 1e-10 * max(1.0, abs(self.f_star)):
                raise InvalidArgument(
                    f"f_star={self.f_star!r} but f(x_star)={f_at!r}")

    @property
    def order(self) -> int:
        return self.oracle.order

    @property
    def dimension(self) -> int:
        return self.oracle.dimension

    @property
    def lipschitz(self) -> float:
        return self.oracle.lipschitz

    def gap(self, y) -> Optional[float]:
        if self.f_star is None:
            return None
        return self.oracle.value(y) - self.f_star

    def to_json(self) -> str:
        """Instance descriptor: family, sizes, seed, L_p and f*."""
        desc = {
            "family": self.descriptor.get("family"),
            "d": self.descriptor.get("d", self.dimension),
            "m": self.descriptor.get("m"),
            "p": self.order,
            "seed": self.descriptor.get("seed"),
            "target_norm": self.descriptor.get("target_norm"),
            "L_p": self.lipschitz,
            "f_star": self.f_star,
        }
        return json.dumps(desc, sort_keys=True, indent=2) + "\n"


# -- validation ---------------------------------------------------------------

@dataclass
class ValidationReport:
    samples: int
    max_value_ratio: float
    max_grad_ratio: float
    max_grad_fd_error: float
    max_hess_fd_error: float
    witness: Optional[tuple] = None

    @property
    def max_ratio(self) -> float:
        return max(self.max_value_ratio, self.max_grad_ratio)

    def as_dict(self) -> dict:
        return {
            "samples": self.samples,
            "max_value_ratio": self.max_value_ratio,
            "max_grad_ratio": self.max_grad_ratio,
            "max_grad_fd_error": self.max_grad_fd_error,
            "max_hess_fd_error": self.max_hess_fd_error,
        }


def _fd_gradient(fun, y, step):
    out = np.empty_like(y)
    for i in range(y.size):
        e = np.zeros_like(y)
        e[i] = step
        out[i] = (fun(y + e) - fun(y - e)) / (2 * step)
    return out


def sample_pairs(dim: int, samples: int, seed: int, radius: float):
    """Seeded (x, y) pairs: x in a ball of ``radius``, ``y - x`` at mixed scales."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(samples):
        u = rng.standard_normal(dim)
        x = radius * rng.uniform() ** (1.0 / dim) * u / np.linalg.norm(u)
        v = rng.standard_normal(dim)
        length = radius * 10.0 ** rng.uniform(-2.0, 0.3)
        pairs.append((x, x + length * v / np.linalg.norm(v)))
    return pairs


def validate_oracle(oracle: ProblemOracle, samples: int = 100, seed: int = 0,
                    radius: float = 2.0, fd_tol: float = 1e-5,
                    ratio_tol: float = 1e-6) -> ValidationReport:
    """Check the Taylor remainder bounds and derivative consistency on samples.

    For each seeded pair ``(x, y)`` this asserts

    * ``|f(y) - f_p(y, x)| <= L_p ||y-x||^{p+1} / (p+1)!``
    * ``||grad f(y) - grad_y f_p(y, x)|| <= L_p ||y-x||^p / p!``

    up to a factor ``1 + ratio_tol``, and that the model gradient and Hessian
    agree with central differences of the model value and gradient.  Uses
    uncounted evaluations.

    Raises
    ------
    ValidationFailure
        When any ratio exceeds ``1 + ratio_tol`` or a finite-difference
        mismatch exceeds ``fd_tol``; ``witness`` holds the offending pair.
    """
    p, L = oracle.order, oracle.lipschitz
    value_den = L / math.factorial(p + 1)
    grad_den = L / math.factorial(p)
    rep = ValidationReport(samples, 0.0, 0.0, 0.0, 0.0)
    worst = (-1.0, None)
    for x, y in sample_pairs(oracle.dimension, samples, seed, radius):
        model = oracle.peek_expansion(x)
        h = y - x
        r = float(np.linalg.norm(h))
        val_err = abs(oracle.peek_value(y) - model.value(h))
        grad_err = float(np.linalg.norm(oracle.peek_gradient(y) - model.grad(h)))
        vr = val_err / (value_den * r ** (p + 1))
        gr = grad_err / (grad_den * r ** p)
        rep.max_value_ratio = max(rep.max_value_ratio, vr)
        rep.max_grad_ratio = max(rep.max_grad_ratio, gr)
        if max(vr, gr) > worst[0]:
            worst = (max(vr, gr), (x, y))

        step = 1e-6 * max(1.0, float(np.linalg.norm(h)))
        g = model.grad(h)
        g_fd = _fd_gradient(model.value, h, step)
        rep.max_grad_fd_error = max(
            rep.max_grad_fd_error,
            float(np.linalg.norm(g_fd - g)) / max(1.0, float(np.linalg.norm(g))))
        Hm = model.hess(h)
        H_fd = np.column_stack([
            (model.grad(h + step * e) - model.grad(h - step * e)) / (2 * step)
            for e in np.eye(oracle.dimension)])
        rep.max_hess_fd_error = max(
            rep.max_hess_fd_error,
            float(np.linalg.norm(H_fd - Hm, 2)) / max(1.0, float(np.linalg.norm(Hm, 2))))
    rep.witness = worst[1]

    if rep.max_ratio > 1.0 + ratio_tol:
        raise ValidationFailure(
            f"remainder bound violated: ratio {rep.max_ratio:.6g} > 1 (L_p={L:.6g})",
            witness=rep.witness, report=rep)
    if max(rep.max_grad_fd_error, rep.max_hess_fd_error) > fd_tol:
        raise ValidationFailure(
            "model derivatives disagree with finite differences: "
            f"grad {rep.max_grad_fd_error:.3g}, hess {rep.max_hess_fd_error:.3g}",
            witness=rep.witness, report=rep)
    return rep
