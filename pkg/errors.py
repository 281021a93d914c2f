"""
Exception hierarchy for the Loynes exponent toolkit.

Parameter problems map to exit code 1, data problems to exit code 2.
"""

from typing import Optional


class LoynesError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(LoynesError, ValueError):
    """Invalid model or estimator parameters."""


class ConfigurationError(ParameterError):
    """Incompatible or incomplete run configuration."""


class UsageError(ParameterError):
    """Unknown subcommand or flag on the command line."""

    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


class DataError(LoynesError, ValueError):
    """Problems with observed data."""


class DataFormatError(DataError):
    """A trace file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyInputError(DataFormatError):
    """A trace file holds no values."""


class InsufficientDataError(DataError):
    """Not enough observations for the requested computation."""


class StateDomainError(DataError):
    """A trace value is not in the declared state list."""


class OutputError(DataError):
    """An output path could not be written."""


EXIT_OK = 0
EXIT_PARAMETER = 1
EXIT_DATA = 2


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the command-line exit code."""
    if isinstance(exc, ParameterError):
        return EXIT_PARAMETER
    if isinstance(exc, (DataError, OSError)):
        return EXIT_DATA
    return EXIT_PARAMETER
