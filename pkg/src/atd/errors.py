"""Exception hierarchy shared by the solver modules."""


class InvalidArgument(ValueError):
    """Bad sizes, non-finite inputs, or parameters outside their domain."""


class ValidationFailure(AssertionError):
    """An oracle failed a sampled remainder or finite-difference check."""

    def __init__(self, message, witness=None, report=None):
        super().__init__(message)
        self.witness = witness
        self.report = report


class SubsolveFailure(RuntimeError):
    """The regularized Taylor subproblem did not reach its tolerance."""

    def __init__(self, message, best_residual=float("nan"), z=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.z = z


class LineSearchFailure(RuntimeError):
    """The step-size search exhausted its probe budget."""

    def __init__(self, message, bracket=None, probes=None):
        super().__init__(message)
        self.bracket = bracket
        self.probes = probes or []


class InvariantViolation(AssertionError):
    """Raised in strict mode when a runtime-checked inequality fails."""

    def __init__(self, violation):
        super().__init__(str(violation))
        self.violation = violation


class EstimationError(ValueError):
    """Not enough usable points for a slope fit."""
