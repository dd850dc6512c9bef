"""Exception hierarchy used across the toolkit."""


class FTRError(Exception):
    """Base class for all toolkit errors."""


class DataError(FTRError, ValueError):
    """Input data is malformed (non-finite entries, wrong shape, ...)."""


class NumericalError(FTRError, ArithmeticError):
    """A numerical kernel failed (SVD non-convergence, singular solve)."""


class DivergenceError(NumericalError):
    """An iterative solver's residual blew up."""


class StagnationError(NumericalError):
    """An iterative solver stopped making progress."""


class IntegrationError(NumericalError):
    """Time integration aborted; ``t`` holds the time of failure."""

    def __init__(self, message, t):
        super().__init__(f"{message} (t={t:.6g})")
        self.t = t


class FormatError(FTRError, ValueError):
    """Snapshot file is corrupt; ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class DetectionError(FTRError, ValueError):
    """No front could be detected in the supplied data."""


class ConfigError(FTRError, ValueError):
    """Scenario configuration is invalid."""
