"""Exception types that map onto CLI exit codes."""
from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration or command usage (exit code 1)."""


class DataFormatError(ValueError):
    """Malformed or inconsistent input file (exit code 2)."""


class NumericError(RuntimeError):
    """Non-finite values produced during computation (exit code 3)."""
