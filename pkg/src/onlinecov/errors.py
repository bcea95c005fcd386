"""Exception types raised across the package."""

from __future__ import annotations


class OnlineCovError(Exception):
    """Base class for all package errors."""


class InvalidParams(OnlineCovError, ValueError):
    pass


class OutOfSupport(OnlineCovError, ValueError):
    pass


class BranchFailure(OnlineCovError, ArithmeticError):
    pass


class QuadratureFailure(OnlineCovError, ArithmeticError):
    pass


class UnsupportedKind(OnlineCovError, ValueError):
    pass


class SingularBaseline(OnlineCovError, ArithmeticError):
    pass


class ShapeMismatch(OnlineCovError, ValueError):
    pass


class NonfiniteInput(OnlineCovError, ValueError):
    pass


class NumericalBreakdown(OnlineCovError, ArithmeticError):
    pass


class NonfiniteStatistic(OnlineCovError, ArithmeticError):
    pass


class DegenerateData(OnlineCovError, ValueError):
    pass


class EmptyBatch(OnlineCovError, ValueError):
    pass


class MalformedCSV(OnlineCovError, ValueError):
    pass


class EmptyPanel(OnlineCovError, ValueError):
    pass


class NonpositivePrice(OnlineCovError, ValueError):
    pass


class SelectionTooLarge(OnlineCovError, ValueError):
    pass
