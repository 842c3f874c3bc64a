"""Shared exception types."""


class CalibrationError(RuntimeError):
    """A numerical calibration loop failed to converge or bracket its target."""
