"""Exception hierarchy shared by all modules."""


class HeatDriftError(Exception):
    """Base class for errors raised by heatdrift."""


class ParameterError(HeatDriftError, ValueError):
    """Invalid parameter, grid, or configuration value."""


class InstabilityError(HeatDriftError, ArithmeticError):
    """A variance went negative beyond round-off; the step is too large.

    Attributes
    ----------
    k : int or None
        Mode index at which the failure occurred.
    t : float or None
        Time of the offending step.
    """

    def __init__(self, message, k=None, t=None):
        super().__init__(message)
        self.k = k
        self.t = t


class TruncationError(HeatDriftError):
    """A spectral sum could not meet its tail tolerance within ``k_max``."""


class FitError(HeatDriftError, ValueError):
    """A rate fit was requested over an unusable window."""
