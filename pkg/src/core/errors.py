"""Domain errors and their exit-code classification.

Every failure raised by the numerical modules derives from InnerFunctionError.
The CLI maps errors onto the exit-code contract through classify_error().
"""

from enum import IntEnum

from pydantic import ValidationError


class ExitCode(IntEnum):
    """Process exit codes shared by all CLI commands."""

    OK = 0
    CONFIG_ERROR = 1
    INVARIANT_FAILURE = 2
    STAGNATION = 3


class InnerFunctionError(Exception):
    """Base class for all domain errors."""

    pass


class ConfigurationError(InnerFunctionError):
    """Invalid run configuration or input document."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class DomainError(InnerFunctionError):
    """Argument outside the mathematical domain of an operation."""

    pass


class BoundaryError(InnerFunctionError):
    """Point fails the boundary membership check of the covering domain."""

    pass


class RamificationError(InnerFunctionError):
    """Lift requested on (or too close to) the ramification locus."""

    pass


class NonFiniteError(InnerFunctionError):
    """Integrand produced NaN or infinite values."""

    pass


class TermBudgetError(InnerFunctionError):
    """Polynomial term count exceeds the configured cap."""

    def __init__(self, message: str, terms: int, cap: int):
        super().__init__(message)
        self.terms = terms
        self.cap = cap


class EmptyInputError(InnerFunctionError):
    """Operation received an empty point set."""

    pass


class SeparationError(InnerFunctionError):
    """Center set violates the pairwise separation precondition."""

    pass


class DegreeError(InnerFunctionError):
    """Requested polynomial degree is unsupported."""

    pass


class PoleError(InnerFunctionError):
    """Evaluation point coincides with a pole."""

    pass


class TargetError(InnerFunctionError):
    """Target modulus is not strictly positive on the probe set."""

    pass


class InvariantViolation(InnerFunctionError):
    """A checked invariant failed."""

    pass


class ApproximationError(InnerFunctionError):
    """Projection step could not meet the psi/4 sup test."""

    pass


class StagnationError(InnerFunctionError):
    """Series step produced too little energy or no defect decrease."""

    def __init__(self, message: str, energy_ratio: float | None = None):
        super().__init__(message)
        self.energy_ratio = energy_ratio


def classify_error(error: Exception) -> ExitCode:
    """Classify an exception into the CLI exit-code contract.

    Args:
        error: Exception raised while running a command

    Returns:
        CONFIG_ERROR for configuration and positivity problems, STAGNATION for a
        stalled series, INVARIANT_FAILURE for everything else
    """
    if isinstance(error, (ConfigurationError, TargetError)):
        return ExitCode.CONFIG_ERROR

    if isinstance(error, ValidationError):
        return ExitCode.CONFIG_ERROR

    if isinstance(error, StagnationError):
        return ExitCode.STAGNATION

    return ExitCode.INVARIANT_FAILURE
