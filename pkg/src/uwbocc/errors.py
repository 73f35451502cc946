"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
DivergenceError -> 4.
"""


class UwboccError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(UwboccError, ValueError):
    """Invalid configuration, parameters, or usage."""


class DataError(UwboccError, RuntimeError):
    """Missing, corrupt, or inconsistent data on disk or in a manifest."""


class DivergenceError(UwboccError, ArithmeticError):
    """Training or inference produced non-finite values."""
