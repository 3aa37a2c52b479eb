"""Exception hierarchy.

Everything raised on purpose by this package derives from ProbeLiftError so
callers can catch one type at the CLI boundary.
"""


class ProbeLiftError(Exception):
    """Base class for all probelift errors."""


class DomainError(ProbeLiftError, ValueError):
    """An argument violates a documented precondition (out of range, bad shape...)."""


class FormatError(ProbeLiftError, ValueError):
    """A file on disk does not match the expected on-disk format."""


class DegenerateInputError(ProbeLiftError, ValueError):
    """Input is structurally valid but degenerate (e.g. all pixels clipped)."""


class ConvergenceError(ProbeLiftError, RuntimeError):
    """The iterative solver hit its iteration bound before meeting tolerances."""

    def __init__(self, message, kkt_residual=None, iterations=None):
        super().__init__(message)
        self.kkt_residual = kkt_residual
        self.iterations = iterations
