"""Exception types raised by the operator library and solvers."""


class AdaptiveQRError(Exception):
    """Base class for all library errors."""


class NoConversion(AdaptiveQRError):
    """No banded conversion path exists between two spaces."""


class DomainError(AdaptiveQRError, ValueError):
    """A point lies outside the domain of a space."""


class BandMismatch(AdaptiveQRError, ValueError):
    """A banded block cannot hold the bands of an operator."""


class NoConvergence(AdaptiveQRError):
    """The adaptive QR tail criterion was not met before the column cap."""

    def __init__(self, max_n, message=None):
        self.max_n = max_n
        super().__init__(message or f"no convergence within {max_n} columns")


class SingularError(AdaptiveQRError):
    """A zero pivot was met during elimination or back substitution."""


class SingularBoundaryBlock(AdaptiveQRError):
    """The principal block of the discretized boundary rows is singular."""


class ResidualImag(AdaptiveQRError):
    """Imaginary residue of a real problem exceeds the drop threshold."""
