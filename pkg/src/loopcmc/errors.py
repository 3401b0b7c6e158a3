"""Exception types raised across the package."""


class LoopCMCError(Exception):
    """Base class for all package errors."""


class InvalidArgument(LoopCMCError, ValueError):
    pass


class NotInvertibleError(LoopCMCError):
    """The truncated block-Toeplitz system for an inverse is singular."""


class BigCellFailure(LoopCMCError):
    """A loop lies off the Birkhoff big cell (at the working truncation).

    ``rcond`` carries the reciprocal condition estimate that triggered it.
    """

    def __init__(self, message, rcond=0.0, location=None):
        super().__init__(message)
        self.rcond = rcond
        self.location = location


class TruncationOverflow(LoopCMCError):
    """Cumulative truncation tail exceeded the configured budget."""


class EmptyResultError(LoopCMCError):
    """Every grid point failed to split."""


class ExtractionFailed(LoopCMCError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location
