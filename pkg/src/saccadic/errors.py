class SaccadeError(Exception):
    """Base class for errors raised by this package."""

    exit_code = 3


class ValidationError(SaccadeError, ValueError):
    exit_code = 1


class BoundaryError(SaccadeError, IndexError):
    """A fragment window would leave the signal."""

    exit_code = 3


class ExperimentError(SaccadeError):
    """An experiment could not produce a result (e.g. nothing fired)."""

    exit_code = 3

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details
