"""Error handling utilities for the fedtalora project.

This module provides the exception hierarchy shared by every package, the
logging setup, and helpers for consistent error reporting. Library code
raises these exceptions; only the command-line layer turns them into exit
codes through the `handle_cli_errors` decorator.

Example:
    >>> @handle_cli_errors
    ... def cmd_example(args):
    ...     raise ConfigurationError("train.rounds must be >= 1")
    >>> cmd_example(None)
    2
"""
import functools
import logging
from typing import Any, Callable, Optional

import yaml

from ..config import LOG_LEVEL

# Configure logging
logging.basicConfig(
    level=getattr(logging, LOG_LEVEL, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


class FedTaLoRAError(Exception):
    """Base class for every error raised by the simulator."""


class ShapeError(FedTaLoRAError):
    """Operand shapes are incompatible."""

    def __init__(self, message: str, *shapes: Any):
        if shapes:
            message = f"{message}: " + " vs ".join(str(list(s)) for s in shapes)
        super().__init__(message)
        self.shapes = shapes


class ValidationError(FedTaLoRAError):
    """A value is outside its declared domain (labels, NaN features, empty sets)."""


class DatasetParseError(ValidationError):
    """A dataset file could not be parsed.

    Attributes:
        line_number: 1-based line of the offending record.
    """

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ConfigurationError(FedTaLoRAError):
    """An experiment or component is configured inconsistently.

    Attributes:
        field: Dotted config path of the offending field, if known.
    """

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class ProtocolError(FedTaLoRAError):
    """The federated protocol cannot proceed (no data, inconsistent uploads)."""


class EmptyShardError(ProtocolError):
    """A client holds no samples for the current task and must be skipped."""


class UsageError(FedTaLoRAError):
    """An API was called out of order (e.g. backward on an untraced value)."""


class RunLockError(FedTaLoRAError):
    """Another experiment process holds the output directory."""


def log_error(error: Exception, context: str = "") -> None:
    """Log an error with context.

    Args:
        error: The exception that occurred.
        context: Additional context about where the error occurred.
            Defaults to an empty string.
    """
    error_msg = f"{context}: {str(error)}" if context else str(error)
    logger.error(error_msg)


def exit_code_for(error: BaseException) -> int:
    """Map an exception onto the stable CLI exit-code contract."""
    if isinstance(error, (ConfigurationError, yaml.YAMLError)):
        return EXIT_CONFIG
    return EXIT_FAILURE


def handle_cli_errors(func: Callable[..., int]) -> Callable[..., int]:
    """Decorator turning raised errors of a sub-command into exit codes.

    Configuration problems exit with 2, every other failure with 1. The
    error is logged through `log_error` with the command name as context.

    Args:
        func: A sub-command returning an exit code.

    Returns:
        The wrapped sub-command.
    """
    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> int:
        try:
            return func(*args, **kwargs)
        except Exception as e:
            log_error(e, func.__name__)
            return exit_code_for(e)
    return wrapper
