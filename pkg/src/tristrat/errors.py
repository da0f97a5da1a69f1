"""Exception hierarchy shared across the package."""

from __future__ import annotations


class TristratError(Exception):
    """Base class for all package errors."""


class ParseError(TristratError):
    """An input record could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(TristratError):
    """A parsed record violates a domain invariant."""


class WarmupError(TristratError):
    """Not enough history precedes the requested week."""

    def __init__(self, message: str, first_valid_week: int | None = None):
        self.first_valid_week = first_valid_week
        super().__init__(message)


class UndefinedMetricError(TristratError):
    """A performance metric is mathematically undefined for the input."""


class ConfigError(TristratError):
    """Run configuration is inconsistent with itself or with the data."""
