"""Exception hierarchy shared by every module."""


class ExactSemError(Exception):
    """Base class for all errors raised by exactsem."""


class ValidationError(ExactSemError):
    """Malformed model, document or expression.

    ``location`` is a human-readable pointer into the offending input, e.g.
    ``"equations.L:5"`` (field path and 1-based column).
    """

    def __init__(self, message, location=None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class EvaluationError(ExactSemError):
    """Expression could not be evaluated (e.g. boolean connective on a non-{0,1} operand)."""


class PreconditionError(ExactSemError):
    """An operation's documented precondition does not hold for its input."""


class SingularSystemError(PreconditionError):
    """``I - A_do`` is singular, so the intervened linear system has no unique solution."""


class NotApplicableError(ExactSemError):
    """A closed-form route does not apply; callers fall back to sampling."""


class SolverError(ExactSemError):
    """Fixed-point iteration failed to converge."""

    def __init__(self, message, residual=None, draw_index=None):
        self.residual = residual
        self.draw_index = draw_index
        super().__init__(message)


class StructuralError(ExactSemError):
    """An intervention map or transformation is inconsistent with the catalogs it connects."""


class CertificationError(ExactSemError):
    """A constructor output failed its internal exactness check."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
