"""Exception types shared across the package."""


class PowerobsError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PowerobsError):
    """A configuration value or invariant check failed.

    The message carries the path of the offending field, e.g.
    ``network.initial.Y[0][1]``.
    """


class ParseError(PowerobsError):
    """A config document could not be parsed at all (syntax level)."""


class NonPositiveDerivedConstant(PowerobsError):
    """Deriving machine constants produced a non-positive a_i or negative b_i."""


class NonFiniteState(PowerobsError):
    """The integrator produced a NaN or infinity."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class RiccatiDivergence(PowerobsError):
    """The Riccati solution H grew past its configured bound."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class EmptyWindow(PowerobsError):
    """A windowed diagnostic was given fewer than two samples."""
