"""Exception types shared across the pipeline."""


class StabilityMeterError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(StabilityMeterError):
    """Invalid configuration value (window sizes, profiles, flag combinations)."""


class LogFormatError(StabilityMeterError):
    """Structurally malformed input log (missing columns, bad timestamps)."""


class LogValueError(StabilityMeterError):
    """Malformed value in an otherwise well-formed log row."""


class EmptyLogError(StabilityMeterError):
    """The input log contains no events."""


class NotReadyError(StabilityMeterError):
    """A model was asked to predict before it received any training."""
