"""Exception hierarchy.

Everything derives from :class:`EntorderError`; the CLI maps
:class:`ConfigError` subclasses to exit status 2 and :class:`StateFileError`
to exit status 3.
"""


class EntorderError(Exception):
    """Base class for all package errors."""


class ConfigError(EntorderError):
    """Invalid input: a violated precondition or a malformed spec string."""


class DimensionMismatch(ConfigError):
    pass


class NotHermitian(ConfigError):
    pass


class NegativeEigenvalue(ConfigError):
    pass


class NotUnitTrace(ConfigError):
    pass


class NotPositive(ConfigError):
    pass


class DomainError(ConfigError):
    pass


class IncompatibleMeasure(ConfigError):
    pass


class EpsilonTooLarge(ConfigError):
    pass


class LengthMismatch(ConfigError):
    pass


class StateFileError(EntorderError):
    """A state or config file could not be read or parsed."""
