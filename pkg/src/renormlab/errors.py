"""Exception types shared across the package."""


class RenormlabError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(RenormlabError, ValueError):
    """A point or chart does not match the dimension of an expression."""


class EvaluationOverflowError(RenormlabError, ArithmeticError):
    """Evaluation produced a non-finite value (reported instead of NaN/inf)."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NotHarmonicError(RenormlabError, ValueError):
    """A polynomial coefficient table does not annihilate under the Laplacian."""


class PreconditionError(RenormlabError, ValueError):
    """An operation's stated precondition is violated."""


class PositivityError(PreconditionError):
    """A function required to be positive took a non-positive sampled value."""


class DegenerateGridError(RenormlabError, ValueError):
    """A sample grid is degenerate (e.g. all points coincide)."""


class SelectionIncompleteError(RenormlabError, RuntimeError):
    """Point selection exhausted its budget without a certified result.

    Carries the best candidate found so far in ``best_candidate``.
    """

    def __init__(self, message, best_candidate=None, iterations=None):
        super().__init__(message)
        self.best_candidate = best_candidate
        self.iterations = iterations


class SingularMatrixError(RenormlabError, ArithmeticError):
    """A matrix value was singular where an inverse is required."""

    def __init__(self, message, det=None):
        super().__init__(message)
        self.det = det


class ConfigError(RenormlabError, ValueError):
    """A scenario configuration failed to parse or validate."""
