"""Utility modules: errors, logging, configuration, metrics and reports."""

from .exceptions import CollaGANError, ConfigError, DataError, NumericError, DimensionError
from .logger import get_logger

__all__ = [
    "CollaGANError",
    "ConfigError",
    "DataError",
    "NumericError",
    "DimensionError",
    "get_logger",
]
