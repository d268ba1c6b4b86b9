"""Logging configuration and setup."""

import functools
import logging
import sys
import time
from collections.abc import Callable
from typing import Any
from typing import Optional
from typing import TypeVar

import structlog

from cxr_preproc.config import Settings
from cxr_preproc.config import settings

F = TypeVar("F", bound=Callable[..., Any])


def setup_logging(runtime: Optional[Settings] = None) -> None:
    """Set up structured logging configuration.

    Args:
        runtime: Settings to read level and format from (defaults to global)
    """
    runtime = runtime or settings
    level = getattr(logging, runtime.log_level.upper(), logging.INFO)

    # Configure standard library logging
    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=level)

    processors: list[Any] = [
        structlog.contextvars.merge_contextvars,
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
    ]

    if runtime.log_format.lower() == "json":
        processors.extend(
            [
                structlog.processors.dict_tracebacks,
                structlog.processors.JSONRenderer(),
            ]
        )
    else:
        processors.extend(
            [
                structlog.processors.CallsiteParameterAdder(
                    {
                        structlog.processors.CallsiteParameter.FILENAME,
                        structlog.processors.CallsiteParameter.FUNC_NAME,
                        structlog.processors.CallsiteParameter.LINENO,
                    }
                ),
                structlog.dev.ConsoleRenderer(colors=False),
            ]
        )

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=True,
    )


class LoggerMixin:
    """Mixin class to add logging capabilities to any class."""

    @property
    def logger(self) -> structlog.stdlib.BoundLogger:
        """Get logger for this class."""
        return structlog.get_logger(self.__class__.__name__)


def log_execution_time(func_name: str) -> Callable[[F], F]:
    """Decorator to log execution time of functions.

    Args:
        func_name: Name of the function for logging

    Returns:
        Decorator function
    """

    def decorator(func: F) -> F:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            logger = structlog.get_logger(func_name)
            start_time = time.perf_counter()
            try:
                logger.debug("Function execution started")
                result = func(*args, **kwargs)
            except Exception as e:
                logger.error(
                    "Function execution failed",
                    execution_time=round(time.perf_counter() - start_time, 3),
                    error=str(e),
                )
                raise
            logger.info(
                "Function execution completed",
                execution_time=round(time.perf_counter() - start_time, 3),
            )
            return result

        return wrapper  # type: ignore[return-value]

    return decorator


def log_data_operation(operation: str, count: int, **kwargs: Any) -> None:
    """Log data operation with standardized format.

    Args:
        operation: Pipeline stage (preprocess, train, evaluate, report)
        count: Number of items processed
        **kwargs: Additional context data
    """
    logger = structlog.get_logger("data_operation")
    logger.info("Data operation completed", operation=operation, item_count=count, **kwargs)


def log_error_with_context(
    logger: structlog.stdlib.BoundLogger,
    error: Exception,
    context: dict[str, Any],
    operation: str = "unknown",
) -> None:
    """Log error with additional context information.

    Args:
        logger: Structlog logger instance
        error: Exception that occurred
        context: Additional context information
        operation: Name of the operation that failed
    """
    logger.error(
        "Operation failed with error",
        operation=operation,
        error_type=type(error).__name__,
        error_message=str(error),
        **context,
    )
