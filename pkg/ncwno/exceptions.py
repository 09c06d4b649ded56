"""Exceptions raised by :mod:`ncwno`."""


class NumericalError(FloatingPointError):
    """Raised when a loss or a simulated field stops being finite."""


class StabilityError(ValueError):
    """Raised when a time step violates the stability bound of an explicit scheme."""


class ConfigError(ValueError):
    """Raised when a run configuration cannot be parsed or validated."""
