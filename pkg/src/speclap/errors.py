"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`SpeclapError`.
The CLI maps :class:`ValidationError` subclasses to exit status 2 and
:class:`ConvergenceError` subclasses to exit status 3.
"""

from __future__ import annotations


class SpeclapError(Exception):
    """Base class for library errors."""


class ValidationError(SpeclapError, ValueError):
    """Input rejected before any computation."""


class InvalidConfigurationError(ValidationError):
    pass


class InvalidArgumentError(ValidationError):
    pass


class NumericInputError(ValidationError):
    pass


class InvalidMeasureError(ValidationError):
    pass


class InvalidNonlinearityError(ValidationError):
    pass


class OnDiagonalError(ValidationError):
    """Kernel requested at x == y where it is singular."""


class NearBoundaryEvaluationError(ValidationError):
    pass


class FitDomainError(ValidationError):
    pass


class ResolutionError(ValidationError):
    pass


class ConvergenceError(SpeclapError, RuntimeError):
    """An iterative or quadrature procedure failed to meet its tolerance."""

    def __init__(self, message: str, *, last_increment: float | None = None, partial=None):
        super().__init__(message)
        self.last_increment = last_increment
        self.partial = partial


class NonConvergenceError(ConvergenceError):
    pass


class QuadratureNonConvergenceError(ConvergenceError):
    pass


class SupersolutionError(ConvergenceError):
    def __init__(self, message: str, *, node=None, **kw):
        super().__init__(message, **kw)
        self.node = node
