"""Exception types shared across the toolkit.

The CLI maps these onto exit codes (config -> 2, numeric -> 3, I/O -> 4);
library callers can catch the base classes.
"""


class ConfigError(ValueError):
    """Invalid or unknown configuration key/value."""


class NumericError(RuntimeError):
    """A numerical procedure failed to produce a trustworthy result."""


class BracketError(NumericError):
    """A 1-D minimization could not bracket an interior minimum."""


class QuadratureError(NumericError):
    """Numerical quadrature did not converge at the requested resolution."""


class CalibrationRangeError(ValueError):
    """Requested point lies outside the calibrated domain; extrapolation is refused."""


class DataFormatError(ValueError):
    """A data file does not conform to the expected on-disk format."""


class MemoryBudgetError(RuntimeError):
    """Expected output exceeds the configured in-memory budget; stream instead."""
