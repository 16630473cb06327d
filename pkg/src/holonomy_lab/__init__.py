"""Numerical laboratory for dynamical holonomy of frame flows on hyperbolic-type spaces."""

__version__ = "0.1.0"


class HolonomyLabError(Exception):
    """Base class for documented numerical failures.

    ``code`` is a short machine-readable identifier used by the CLI error object.
    """

    code = "numeric-failure"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self), "details": self.details}


class ContractViolation(HolonomyLabError, ValueError):
    code = "contract-violation"


class LogBranchError(HolonomyLabError):
    code = "log-branch-failure"


class ChartExit(HolonomyLabError):
    code = "chart-exit"


class ConvergenceError(HolonomyLabError):
    code = "no-convergence"


class ExtrapolationError(HolonomyLabError):
    code = "extrapolation-disagreement"


__all__ = [
    "HolonomyLabError",
    "ContractViolation",
    "LogBranchError",
    "ChartExit",
    "ConvergenceError",
    "ExtrapolationError",
]
