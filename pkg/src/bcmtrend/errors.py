"""Exception hierarchy shared by the library and the command-line interface."""


class BcmError(Exception):
    """Base class for all errors raised by :mod:`bcmtrend`."""


class DomainError(BcmError, ValueError):
    """An argument lies outside the domain of the operation."""


class ValidationError(BcmError, ValueError):
    """Input data or configuration violates a documented invariant."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(f"field '{field}'")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class NumericalError(BcmError, ArithmeticError):
    """Base class for failures of a numerical procedure."""


class EvaluationError(NumericalError):
    """A likelihood or derivative evaluated to a non-finite value."""


class NoInformationError(NumericalError):
    """The data carry no information about the requested quantity (e.g. zero events)."""


class SingularInformationError(NumericalError):
    """An information matrix is singular or not positive definite."""


class ConvergenceError(NumericalError):
    """An iterative fit failed to converge."""


class DecisionUnavailableError(NumericalError):
    """A test decision was requested from a fit that did not converge."""


class BoundaryError(NumericalError):
    """The maximum likelihood estimate lies on the boundary of the parameter space."""
