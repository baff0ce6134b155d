"""Exception hierarchy shared across the package."""


class BreachRiskError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(BreachRiskError, ValueError):
    """Input data or configuration violates a documented contract."""


class DomainError(BreachRiskError, ValueError):
    """A parameter or argument lies outside a function's domain."""


class NumericalError(BreachRiskError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class FitError(NumericalError):
    """Maximum-likelihood estimation failed or hit a constraint boundary."""

    def __init__(self, message, trace=None, estimate=None):
        super().__init__(message)
        self.trace = trace or []
        # best (rejected) estimate, when one exists
        self.estimate = estimate


class SelectionError(FitError):
    """Every candidate model in a selection run failed to fit."""
