"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CfouError(Exception):
    """Base class for all package errors."""


class DomainError(CfouError, ValueError):
    """A parameter lies outside the range where a formula is defined."""


class SynthesisError(CfouError, RuntimeError):
    """Exact Gaussian synthesis could not be carried out."""


class AccuracyError(CfouError, ArithmeticError):
    """Quadrature or iteration failed to reach the requested tolerance.

    Attributes:
        estimate: best value available when the routine gave up.
        error_bound: the error estimate attached to ``estimate``.
    """

    def __init__(self, message: str, estimate=None, error_bound: float | None = None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class DegenerateDenominatorError(CfouError, ZeroDivisionError):
    """The least-squares denominator vanished (identically zero path)."""


class DiagnosticsError(CfouError, ValueError):
    """Normality diagnostics cannot be formed (e.g. singular target covariance)."""
