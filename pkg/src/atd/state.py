"""Run state, trace rows and solver configuration."""

import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

TRACE_COLUMNS = ("k", "gap", "A_k", "lambda_k", "a_k", "zeta_k", "step_norm",
                 "oracle_calls_cum", "bisect_iters", "potential", "certificate")
TRACE_SCHEMA_VERSION = 1

NAN = float("nan")


class CompensatedSum:
    """Neumaier summation for long running totals."""

    def __init__(self, value=0.0):
        self._sum = float(value)
        self._comp = 0.0

    def add(self, x):
        x = float(x)
        t = self._sum + x
        if abs(self._sum) >= abs(x):
            self._comp += (self._sum - t) + x
        else:
            self._comp += (x - t) + self._sum
        self._sum = t

    @property
    def value(self):
        return self._sum + self._comp


@dataclass
class ATDConfig:
    """Knobs for :func:`atd.engine.run_atd`.

    ``radius`` is a user-supplied bound R >= ||x*||, used whenever the
    instance does not know its minimizer.
    """

    target: float = 7.0 / 12.0
    radius: Optional[float] = None
    tol_sub: float = 1e-10
    strict: bool = False
    max_probes_override: Optional[int] = None
    warm_start: bool = True
    keep_history: bool = False


@dataclass
class SolverState:
    k: int
    A: float
    x: np.ndarray
    y: np.ndarray
    f_y: float
    psi: CompensatedSum = field(default_factory=CompensatedSum)
    tradeoff: CompensatedSum = field(default_factory=CompensatedSum)
    lambda_history: list = field(default_factory=list)
    a_history: list = field(default_factory=list)
    sqrt_lambda_sum: float = 0.0
    theta_hint: Optional[float] = None

    @classmethod
    def initial(cls, dim, f0):
        return cls(k=0, A=0.0, x=np.zeros(dim), y=np.zeros(dim), f_y=float(f0))

    @property
    def potential(self) -> float:
        """psi_k(x_k) - A_k f(y_k)."""
        return self.psi.value - self.A * self.f_y

    @property
    def tradeoff_sum(self) -> float:
        return self.tradeoff.value


@dataclass
class TraceRecord:
    k: int
    gap: float = NAN
    A_k: float = NAN
    lambda_k: float = NAN
    a_k: float = NAN
    zeta_k: float = NAN
    step_norm: float = NAN
    oracle_calls_cum: int = 0
    bisect_iters: int = 0
    potential: float = NAN
    certificate: float = NAN

    def row(self):
        return [getattr(self, name) for name in TRACE_COLUMNS]

    @classmethod
    def from_row(cls, row: dict):
        kw = {}
        for f in fields(cls):
            raw = row[f.name]
            kw[f.name] = int(raw) if f.type is int or f.type == "int" else float(raw)
        return cls(**kw)


@dataclass
class Violation:
    kind: str
    k: int
    lhs: float
    rhs: float

    def __str__(self):
        return f"{self.kind} violated at k={self.k}: {self.lhs!r} vs bound {self.rhs!r}"


@dataclass
class EarlyExit:
    """Point certified by the step search; ``probes`` counts that search's probes."""

    point: np.ndarray
    gap: float
    source: str
    probes: int = 0


@dataclass
class RunResult:
    method: str
    records: list
    violations: list = field(default_factory=list)
    early_exit: Optional[EarlyExit] = None
    state: Optional[SolverState] = None
    probe_cap: Optional[int] = None
    history: Optional[dict] = None
    checks: dict = field(default_factory=dict)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def gaps(self):
        return np.array([r.gap for r in self.records])

    def violation_counts(self):
        out = {}
        for v in self.violations:
            out[v.kind] = out.get(v.kind, 0) + 1
        return out


def rate_constant(p: int) -> float:
    """c_p = 2^{p-1} (p+1)^{(3p+1)/2} / (p-1)!."""
    return 2.0 ** (p - 1) * (p + 1) ** ((3 * p + 1) / 2) / math.factorial(p - 1)
