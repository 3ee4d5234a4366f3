"""Exception hierarchy.

Validation problems (bad geometry, bad config) and numerical failures are
kept apart so the command line can map them to distinct exit codes.
"""


class WaveSourceError(Exception):
    """Base class for all package errors."""


class ValidationError(WaveSourceError, ValueError):
    """Invalid input. ``field`` names the offending item when known."""

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class CoincidentPointError(ValidationError):
    """An evaluation point sits on a singularity of the Green kernel."""


class NumericalError(WaveSourceError, ArithmeticError):
    """A numerical procedure failed."""


class SuperluminalError(NumericalError):
    """Source speed reached or exceeded the wave speed."""


class ConvergenceError(NumericalError):
    """An iterative solve did not converge."""
