"""Exception hierarchy shared by all modules."""


class PcacLureError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatch(PcacLureError, ValueError):
    pass


class NearSingularResolvent(PcacLureError):
    """The resolvent ``zI - A`` is numerically singular at a requested frequency.

    Usually means a pole of the realization lies on (or very near) the
    unit circle.
    """

    def __init__(self, message, mask=None):
        super().__init__(message)
        self.mask = mask


class EigenFailure(PcacLureError):
    pass


class NotHermitian(PcacLureError, ValueError):
    pass


class UnsupportedDimension(PcacLureError, NotImplementedError):
    pass


class InnovationSolveFailure(PcacLureError):
    pass


class SingularNormalEquations(PcacLureError):
    pass


class InnerSolveSingular(PcacLureError):
    pass


class ConfigError(PcacLureError, ValueError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
