"""Command line: ``atd-bench {generate,run,slope,validate}``."""

import argparse
import json
import sys
from dataclasses import asdict

from .bench import (METHODS, RunSpec, fit_slope, generate, load_specs, read_trace,
                    run_matrix)
from .errors import EstimationError, InvalidArgument, ValidationFailure
from .oracle import validate_oracle
from .problems import FAMILIES


def _instance_args(parser):
    parser.add_argument("--family", choices=FAMILIES, default="power")
    parser.add_argument("--p", type=int, default=2, help="Taylor order")
    parser.add_argument("--dim", type=int, default=10)
    parser.add_argument("--rows", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--norm", type=float, default=1.0, help="||x*|| of the planted minimizer")


def _spec(args, **extra):
    return RunSpec(family=args.family, d=args.dim, m=args.rows, p=args.p, seed=args.seed,
                   target_norm=args.norm, **extra)


def build_parser():
    parser = argparse.ArgumentParser(prog="atd-bench",
                                     description="Accelerated Taylor descent benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write an instance descriptor")
    _instance_args(gen)
    gen.add_argument("--out", help="directory for the descriptor (stdout if omitted)")

    run = sub.add_parser("run", help="run solvers, write traces and a summary")
    _instance_args(run)
    run.add_argument("--method", action="append",
                     help=f"solver ({', '.join(METHODS)}); repeat or comma-separate")
    run.add_argument("--iters", type=int, default=100)
    run.add_argument("--eps", type=float, default=None,
                     help="target gap (default 1e-8 L_p ||x*||^(p+1))")
    run.add_argument("--strict", action="store_true", help="stop at the first violated invariant")
    run.add_argument("--radius", type=float, default=None, help="bound R >= ||x*||")
    run.add_argument("--out", default="results")
    run.add_argument("--config", help="JSON file with a RunSpec or a list of them")
    run.add_argument("--workers", type=int, default=1)

    slope = sub.add_parser("slope", help="fit log(gap) against log(k) on a trace CSV")
    slope.add_argument("trace")
    slope.add_argument("--k-min", type=int, default=None)
    slope.add_argument("--k-max", type=int, default=None)

    val = sub.add_parser("validate", help="sampled remainder and finite-difference checks")
    _instance_args(val)
    val.add_argument("--samples", type=int, default=100)
    val.add_argument("--radius", type=float, default=2.0)
    return parser


def _methods(raw):
    if not raw:
        return ["atd"]
    return [m for item in raw for m in item.split(",") if m]


def _dump(obj):
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            inst = generate(_spec(args), args.out)
            if args.out is None:
                sys.stdout.write(inst.to_json())
            return 0

        if args.command == "run":
            if args.workers < 1:
                parser.error("--workers must be >= 1")
            if args.config:
                specs = load_specs(args.config)
            else:
                specs = [_spec(args, methods=_methods(args.method), K=args.iters,
                               epsilon=args.eps, strict=args.strict, out=args.out,
                               radius=args.radius)]
            summary = run_matrix(specs, workers=args.workers, out_dir=args.out)
            for cell in summary["cells"]:
                if cell["failure"]:
                    print(f"{cell['instance']} {cell['method']}: FAILED {cell['failure']}")
                else:
                    print(f"{cell['instance']} {cell['method']}: k={cell['iterations']} "
                          f"gap={cell['final_gap']:.3e} calls={cell['oracle_calls']} "
                          f"violations={cell['violation_total']}")
            return 1 if summary["failures"] or (summary["violations"] and args.strict) else 0

        if args.command == "slope":
            est = fit_slope(read_trace(args.trace), args.k_min, args.k_max)
            _dump(asdict(est))
            return 0

        inst = generate(_spec(args))
        try:
            report = validate_oracle(inst.oracle, samples=args.samples, seed=args.seed,
                                     radius=args.radius)
        except ValidationFailure as exc:
            print(f"validation failed: {exc}", file=sys.stderr)
            if exc.report is not None:
                _dump(exc.report.as_dict())
            return 1
        _dump(report.as_dict())
        return 0
    except (InvalidArgument, EstimationError, OSError, json.JSONDecodeError) as exc:
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
