"""Accelerated Taylor descent with reference baselines and a benchmark harness."""

from .baselines import BaselineConfig, run_agd, run_baseline, run_gd, run_tensor
from .bench import RunSpec, SlopeEstimate, fit_slope, generate, run_matrix
from .engine import (compute_a_next, dual_update, momentum_point, rate_bound,
                     rate_certificate, replay_dual, replay_potential, run_atd)
from .errors import (EstimationError, InvalidArgument, InvariantViolation,
                     LineSearchFailure, SubsolveFailure, ValidationFailure)
from .line_search import eval_zeta, find_lambda, gap_bound, probe_budget
from .oracle import (ProblemInstance, ProblemOracle, TaylorExpansion, taylor_grad,
                     taylor_hess_apply, taylor_value, validate_oracle)
from .problems import (LogCoshProfile, LogSumExpOracle, PowerProfile, RidgeOracle,
                       logsumexp_instance, make_instance, make_logcosh_regression,
                       make_logsumexp, make_power_regression)
from .state import TRACE_COLUMNS, ATDConfig, RunResult, TraceRecord, rate_constant
from .subsolver import SubproblemSolution, solve_model, solve_p2_secular, solve_subproblem

__version__ = "0.1.0"
