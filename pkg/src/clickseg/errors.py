"""Exception hierarchy shared across the toolkit.

ConfigError signals bad configuration (CLI exit code 1); everything under
DataError signals a problem with input data or artifacts (CLI exit code 2).
"""

from __future__ import annotations


class ClickSegError(Exception):
    """Base class for all clickseg errors."""


class ConfigError(ClickSegError):
    """Invalid configuration value or unknown mode."""


class DataError(ClickSegError):
    """Input data cannot be processed (parse failure, degenerate model, ...)."""


class SchemaError(DataError):
    """A CSV header is missing a mandatory column."""


class EventLogParseError(DataError):
    """A row of the event log could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class LinkGraphParseError(DataError):
    """A link graph source could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DegenerateModelError(DataError):
    """The transition system cannot produce a single trace."""


class TrainingDataError(DataError):
    """The training corpus cannot feed the model (no full context window)."""


class UnknownTokenError(DataError):
    """A token is absent from the model vocabulary."""

    def __init__(self, token: str):
        super().__init__(f"unknown token: {token!r}")
        self.token = token


class ModelFormatError(DataError):
    """A persisted model file has an unsupported version or a broken shape."""
