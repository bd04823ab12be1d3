"""Exceptions raised by the AirshipWind package."""
from typing import Optional


class AirshipWindError(Exception):
    """Base class for all AirshipWind errors."""


class GimbalLockError(AirshipWindError, ValueError):
    """Pitch angle at or beyond +/- pi/2."""


class ScaleFactorError(AirshipWindError, ValueError):
    """Pitot scale factor below the configured floor."""


class ConfigError(AirshipWindError, ValueError):
    """Invalid estimator, pipeline or scenario configuration."""


class ModelFormatError(AirshipWindError, ValueError):
    """Model file is truncated, has the wrong version, or wrong layer shapes."""


class DatasetFormatError(AirshipWindError, ValueError):
    """Dataset file could not be parsed."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class MisalignedLogError(AirshipWindError, ValueError):
    """Estimate and truth logs do not share the same time base."""


class FilterDivergenceError(AirshipWindError, ArithmeticError):
    """NaN or Inf reached the filter state or covariance."""
