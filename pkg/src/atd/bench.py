"""Benchmark harness: instance generation, solver matrix, traces and slopes.

A matrix run writes, into one output directory,

* ``<instance>.json``: the instance descriptor,
* ``<instance>__<method>.csv``: one trace row per iterate,
* ``summary.json``: per-cell final gaps, violation counts, oracle totals,
  probe counts against the cap, and any failure message.

Cells run in a process pool; only the parent writes files.
"""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .baselines import METHODS as BASELINE_METHODS
from .baselines import run_agd, run_gd, run_tensor
from .engine import run_atd
from .errors import EstimationError, InvalidArgument
from .problems import FAMILIES, make_instance
from .state import TRACE_COLUMNS, TRACE_SCHEMA_VERSION, ATDConfig, TraceRecord

__all__ = ["RunSpec", "SlopeEstimate", "METHODS", "generate", "instance_name",
           "default_epsilon", "run_cell", "run_matrix", "write_trace", "read_trace",
           "fit_slope", "load_specs", "standard_suite"]

METHODS = ("atd",) + BASELINE_METHODS


@dataclass
class RunSpec:
    """One instance and the solvers to run on it.

    ``epsilon=None`` means ``1e-8 * L_p * ||x*||^{p+1}``.
    """

    family: str = "power"
    d: int = 10
    m: int = 20
    p: int = 2
    seed: int = 0
    target_norm: float = 1.0
    methods: list = field(default_factory=lambda: ["atd"])
    K: int = 100
    epsilon: Optional[float] = None
    strict: bool = False
    out: str = "results"
    radius: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgument(
                f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        for name in ("d", "m", "p", "K"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise InvalidArgument(f"{name} must be an integer >= 1, got {val}")
        if isinstance(self.methods, str):
            self.methods = [s for s in self.methods.split(",") if s]
        if not self.methods:
            raise InvalidArgument("method list is empty")
        bad = [mth for mth in self.methods if mth not in METHODS]
        if bad:
            raise InvalidArgument(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise InvalidArgument("epsilon must be positive")
        if self.target_norm < 0:
            raise InvalidArgument("target_norm must be >= 0")
        if self.radius is not None and not self.radius > 0:
            raise InvalidArgument("radius must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(raw) - known
        if extra:
            raise InvalidArgument(f"unknown RunSpec field(s): {sorted(extra)}")
        return cls(**raw)


@dataclass
class SlopeEstimate:
    slope: float
    intercept: float
    residual: float
    k_min: int
    k_max: int
    points: int


def instance_name(spec: RunSpec) -> str:
    return (f"{spec.family}_p{spec.p}_d{spec.d}_m{spec.m}_s{spec.seed}"
            f"_n{spec.target_norm:g}")


def generate(spec: RunSpec, out_dir: Optional[str] = None):
    """Build the seeded instance; with ``out_dir``, also write its descriptor."""
    inst = make_instance(spec.family, spec.d, spec.m, spec.p, spec.seed, spec.target_norm)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, instance_name(spec) + ".json"), "w") as fh:
            fh.write(inst.to_json())
    return inst


def default_epsilon(instance) -> float:
    scale = instance.lipschitz * instance.norm_x_star ** (instance.order + 1)
    # x* = 0 gives a zero scale; keep epsilon positive
    return 1e-8 * scale if scale > 0 else 1e-300


def _solve(spec, method, instance, epsilon):
    if method == "atd":
        return run_atd(instance, spec.K, epsilon, ATDConfig(strict=spec.strict, radius=spec.radius))
    if method == "gd":
        return run_gd(instance, spec.K)
    if method == "agd":
        return run_agd(instance, spec.K)
    return run_tensor(instance, spec.K, strict=spec.strict)


def run_cell(spec: RunSpec, method: str) -> dict:
    """Run one (instance, method) cell; failures are returned, not raised."""
    instance = generate(spec)
    epsilon = spec.epsilon if spec.epsilon is not None else default_epsilon(instance)
    cell = {"instance": instance_name(spec), "method": method, "epsilon": epsilon,
            "failure": None, "rows": []}
    try:
        result = _solve(spec, method, instance, epsilon)
    except Exception as exc:  # recorded per cell so the matrix keeps going
        cell["failure"] = f"{type(exc).__name__}: {exc}"
        return cell
    recs = result.records
    calls = [r.oracle_calls_cum for r in recs]
    bisect = [r.bisect_iters for r in recs[1:]]
    exit_probes = 0 if result.early_exit is None else result.early_exit.probes
    if result.early_exit is not None:
        final_gap = result.early_exit.gap
    else:
        final_gap = recs[-1].gap
    cell.update({
        "rows": [r.row() for r in recs],
        "iterations": recs[-1].k,
        "final_gap": final_gap,
        "early_exit": None if result.early_exit is None else result.early_exit.source,
        "violations": result.violation_counts(),
        "violation_total": len(result.violations),
        "checks": dict(result.checks),
        "oracle_calls": calls[-1],
        "oracle_calls_per_iteration": [b - a for a, b in zip(calls, calls[1:])],
        "bisect_iters": bisect,
        "exit_probes": exit_probes,
        "max_probes": max(bisect + [exit_probes]),
        "probe_cap": result.probe_cap,
    })
    cell["probes_within_cap"] = (result.probe_cap is None
                                 or cell["max_probes"] <= result.probe_cap)
    return cell


def _format(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trace(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in rows:
            w.writerow([_format(v) for v in row])


def read_trace(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise InvalidArgument(f"{path}: columns {reader.fieldnames} are not the trace schema")
        return [TraceRecord.from_row(row) for row in reader]


def run_matrix(specs, workers: int = 1, out_dir: Optional[str] = None) -> dict:
    """Run every (spec, method) cell and write traces plus ``summary.json``.

    ``out_dir`` defaults to the ``out`` field of the first spec.
    """
    specs = list(specs)
    if not specs:
        raise InvalidArgument("no run specs given")
    out_dir = out_dir or specs[0].out
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(s, mth) for s in specs for mth in s.methods]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(run_cell, *zip(*jobs)))
    else:
        cells = [run_cell(s, mth) for s, mth in jobs]

    summary = {"schema_version": TRACE_SCHEMA_VERSION, "columns": list(TRACE_COLUMNS),
               "cells": []}
    for (spec, _), cell in zip(jobs, cells):
        generate(spec, out_dir)
        rows = cell.pop("rows")
        if cell["failure"] is None:
            trace = f"{cell['instance']}__{cell['method']}.csv"
            write_trace(os.path.join(out_dir, trace), rows)
            cell["trace"] = trace
        summary["cells"].append(cell)
    summary["failures"] = sum(c["failure"] is not None for c in summary["cells"])
    summary["violations"] = sum(c.get("violation_total", 0) for c in summary["cells"])
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return summary


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _trace_arrays(trace):
    if hasattr(trace, "records"):
        trace = trace.records
    if isinstance(trace, dict):
        return np.asarray(trace["k"], dtype=float), np.asarray(trace["gap"], dtype=float)
    k = np.array([r.k for r in trace], dtype=float)
    gap = np.array([r.gap for r in trace], dtype=float)
    return k, gap


def fit_slope(trace, k_min=None, k_max=None, min_points=10) -> SlopeEstimate:
    """Least-squares slope of log(gap) against log(k).

    ``trace`` is a run result, a list of trace records, or a dict with ``k``
    and ``gap`` arrays.  Rows with k < 1 or a nonpositive gap are dropped.
    Without a window, the last half of the remaining rows is used.

    Raises
    ------
    EstimationError
        Fewer than ``min_points`` usable rows.
    """
    k, gap = _trace_arrays(trace)
    keep = (k >= 1) & np.isfinite(gap) & (gap > 0)
    if k_min is not None:
        keep &= k >= k_min
    if k_max is not None:
        keep &= k <= k_max
    k, gap = k[keep], gap[keep]
    if k_min is None and k_max is None:
        half = k.size // 2
        k, gap = k[half:], gap[half:]
    if k.size < min_points:
        raise EstimationError(f"slope fit needs {min_points} points with positive gap, "
                              f"got {k.size}")
    X, Y = np.log(k), np.log(gap)
    (slope, intercept), *_ = np.linalg.lstsq(np.column_stack([X, np.ones_like(X)]), Y,
                                             rcond=None)
    resid = float(np.sqrt(np.mean((Y - slope * X - intercept) ** 2)))
    return SlopeEstimate(float(slope), float(intercept), resid, int(k[0]), int(k[-1]), int(k.size))


def load_specs(path) -> list:
    """RunSpec list from a JSON file holding one object or a list of them."""
    with open(path) as fh:
        raw = json.load(fh)
    if isinstance(raw, dict):
        raw = [raw]
    if not isinstance(raw, list):
        raise InvalidArgument("config must hold a RunSpec object or a list of them")
    return [RunSpec.from_dict(r) for r in raw]


def standard_suite(seeds=range(5), orders=(1, 2, 3), methods=("atd",), K=100, **kw) -> list:
    """Every family at every order and seed, d = 10, m = 20, ||x*|| = 1."""
    return [RunSpec(family=fam, p=p, seed=s, methods=list(methods), K=K, **kw)
            for fam in FAMILIES for p in orders for s in seeds]
