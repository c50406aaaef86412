"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


class ParseError(ValueError):
    """Malformed input file; the message carries the 1-based line number."""


class TrainingDiverged(RuntimeError):
    """Non-finite loss during training; the message carries the step and loss components."""
