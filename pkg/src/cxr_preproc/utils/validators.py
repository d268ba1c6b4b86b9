"""Data validation utilities for the CXR pre-processing pipeline."""

from collections.abc import Iterable
from typing import Any

import numpy as np
import structlog

from cxr_preproc.errors import CxrPreprocError

logger = structlog.get_logger(__name__)


class DataValidationError(CxrPreprocError, ValueError):
    """Custom validation error."""

    pass


class LeakageError(CxrPreprocError):
    """Raised when test identifiers reach a training or validation loader."""

    pass


def validate_unit_interval(values: np.ndarray, name: str = "values") -> None:
    """Validate that an array is finite and within [0, 1].

    Args:
        values: Array to check
        name: Name used in the error message

    Raises:
        DataValidationError: If any value is non-finite or out of range
    """
    if not np.all(np.isfinite(values)):
        raise DataValidationError(f"{name} contains non-finite values")
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise DataValidationError(
            f"{name} outside [0, 1]: min={values.min()!r}, max={values.max()!r}"
        )


def validate_finite(values: np.ndarray, name: str = "values") -> bool:
    """Return True if every value is finite."""
    ok = bool(np.all(np.isfinite(values)))
    if not ok:
        logger.debug("Non-finite values detected", name=name)
    return ok


def parse_binary_cell(value: Any, row_id: str, column: str) -> int:
    """Parse a label cell strictly as 0 or 1.

    Args:
        value: Raw cell content
        row_id: Sample identifier for the error message
        column: Column name for the error message

    Returns:
        0 or 1

    Raises:
        DataValidationError: If the cell is anything but the text 0 or 1
    """
    if value == "0":
        return 0
    if value == "1":
        return 1
    raise DataValidationError(
        f"Non-binary cell {value!r} for sample {row_id!r}, column {column!r}"
    )


def find_duplicates(items: Iterable[str]) -> list[str]:
    """Return the items that occur more than once, in first-repeat order."""
    seen: set[str] = set()
    duplicates: list[str] = []
    for item in items:
        if item in seen and item not in duplicates:
            duplicates.append(item)
        seen.add(item)
    return duplicates


def ensure_disjoint(
    held_out: Iterable[str], **loaders: Iterable[str]
) -> None:
    """Fail hard if held-out identifiers appear in any of the given loaders.

    Args:
        held_out: Test identifiers
        **loaders: Named identifier collections (e.g. train=..., validation=...)

    Raises:
        LeakageError: If any intersection is non-empty
    """
    held = set(held_out)
    for name, ids in loaders.items():
        leaked = held.intersection(ids)
        if leaked:
            raise LeakageError(
                f"{len(leaked)} test ids reached the {name} loader, e.g. {sorted(leaked)[0]!r}"
            )
