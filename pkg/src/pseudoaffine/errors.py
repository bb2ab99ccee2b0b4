"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: domain errors exit with 1,
capacity and convergence errors with 2, I/O errors with 3.
"""


class PseudoAffineError(Exception):
    """Base class for all package errors."""


class DomainError(PseudoAffineError, ValueError):
    """An input lies outside the documented domain."""


class CapabilityError(DomainError):
    """The requested operation needs data the input does not provide."""


class CapacityError(PseudoAffineError):
    """A tolerance or depth cannot be reached within the work budget."""


class DepthError(CapacityError):
    """A query needs more levels than a table stores."""


class ConvergenceError(CapacityError):
    """A series or iteration could not be certified to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
