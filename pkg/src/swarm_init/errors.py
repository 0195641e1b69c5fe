"""Exception hierarchy shared by all modules."""


class SwarmInitError(Exception):
    """Base class for every error raised by this package."""


class InvalidMatrix(SwarmInitError, ValueError):
    pass


class NotPSD(SwarmInitError, ValueError):
    pass


class Overflow(SwarmInitError, ArithmeticError):
    pass


class InvalidProbability(SwarmInitError, ValueError):
    pass


class InvalidRegime(SwarmInitError, ValueError):
    """Raised when the J2 parameter falls outside (-1, 1)."""


class ZeroSpinRate(SwarmInitError, ValueError):
    pass


class ResonantSpin(SwarmInitError, ValueError):
    """A spin harmonic sits on the in-plane eigenfrequency."""


class Disconnected(SwarmInitError, ValueError):
    pass


class BadEdge(SwarmInitError, KeyError):
    pass


class DimensionMismatch(SwarmInitError, ValueError):
    pass


class DegenerateNominal(SwarmInitError, ValueError):
    """Relative dispersion requested around a zero nominal component."""


class ConfigError(SwarmInitError, ValueError):
    """Invalid experiment configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
