"""Error categories shared across the package.

Each category carries the process exit code the CLI reports for it.
"""

from typing import Optional


class CollaGANError(Exception):
    """Base class for all errors raised by this package."""

    exit_code: int = 1
    category: str = "internal"


class ConfigError(CollaGANError):
    """Invalid configuration, flags, or arguments."""

    exit_code = 2
    category = "config"


class DataError(CollaGANError):
    """Missing, corrupt, or inconsistent data on disk."""

    exit_code = 3
    category = "data"


class NumericError(CollaGANError):
    """A computation produced NaN/Inf or an undefined quantity."""

    exit_code = 4
    category = "numeric"


class DimensionError(ConfigError, ValueError):
    """Shape mismatch in a tensor operation."""

    def __init__(
        self,
        op: str,
        axis: str,
        expected: Optional[object] = None,
        actual: Optional[object] = None,
        detail: str = "",
    ):
        self.op = op
        self.axis = axis
        self.expected = expected
        self.actual = actual
        message = f"{op}: dimension mismatch on axis '{axis}'"
        if expected is not None or actual is not None:
            message += f" (expected {expected}, got {actual})"
        if detail:
            message += f": {detail}"
        super().__init__(message)
