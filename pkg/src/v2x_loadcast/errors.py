"""Exception types shared across the toolkit.

Every error raised on purpose derives from LoadcastError so callers (and the
CLI) can distinguish domain failures from bugs.
"""


class LoadcastError(Exception):
    """Base class for all toolkit errors."""


class MalformedRow(LoadcastError):
    """A CSV row could not be parsed (bad numeric field, off-grid or duplicate timestamp)."""


class GapError(LoadcastError):
    """A 5-minute slot is missing from a day's road series."""

    def __init__(self, message: str, slot: int | None = None):
        super().__init__(message)
        self.slot = slot


class BoundsError(LoadcastError):
    """A parsed value lies outside its sanity range (negative flow, speed > 120 mph, ...)."""


class DegenerateSeries(LoadcastError):
    """A correlation was requested over a variable with zero variance."""


class ZeroSpeedInterval(LoadcastError):
    """Dwell time is undefined because the interval speed is zero while flow is positive."""


class DegenerateFeature(LoadcastError):
    """A feature column has zero variance on the training split."""


class InsufficientData(LoadcastError):
    """The series is too short (or misaligned) for the requested windows or split."""


class ShapeMismatch(LoadcastError):
    """Tensor shapes are inconsistent with the model configuration."""


class EmptyBatch(LoadcastError):
    """A metric was requested over zero predictions."""


class ConfigError(LoadcastError):
    """A config file or CLI flag failed validation."""
