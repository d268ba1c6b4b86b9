"""Exception root shared by every pipeline stage."""

from enum import IntEnum


class ExitCode(IntEnum):
    """Process exit codes of the command line interface."""

    SUCCESS = 0
    CONFIGURATION = 1
    DATA = 2
    NUMERICAL = 3
    INTERRUPTED = 130


class CxrPreprocError(Exception):
    """Base class for all pipeline errors."""

    exit_code: ExitCode = ExitCode.DATA


class ConfigurationError(CxrPreprocError):
    """Exception raised for invalid or inconsistent configuration."""

    exit_code = ExitCode.CONFIGURATION


class NumericalError(CxrPreprocError):
    """Exception raised when training produces non-finite values."""

    exit_code = ExitCode.NUMERICAL

    def __init__(self, message: str, step: int | None = None) -> None:
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class ShapeError(CxrPreprocError, ValueError):
    """Exception raised when array shapes or id orders disagree."""

    pass
