"""Common validators and validation utilities for sdtd models and arrays."""

import math

import numpy as np

from sdtd.models.exceptions import NumericalError


def validate_finite_number(value: float, field_name: str = "value") -> float:
    """Validate that a number is finite (not NaN or infinity).

    Args:
        value: Number to validate
        field_name: Name of the field for error messages

    Returns:
        The validated number

    Raises:
        ValueError: If the number is not finite
    """
    if not math.isfinite(value):
        raise ValueError(f"{field_name} must be a finite number, got {value}")
    return value


def validate_positive(value: float, field_name: str = "value") -> float:
    """Validate that a number is positive.

    Raises:
        ValueError: If the number is not positive
    """
    validate_finite_number(value, field_name)
    if value <= 0:
        raise ValueError(f"{field_name} must be positive, got {value}")
    return value


def validate_non_negative(value: float, field_name: str = "value") -> float:
    """Validate that a number is non-negative.

    Raises:
        ValueError: If the number is negative
    """
    validate_finite_number(value, field_name)
    if value < 0:
        raise ValueError(f"{field_name} must be non-negative, got {value}")
    return value


def validate_open_unit_interval(value: float, field_name: str = "value") -> float:
    """Validate that a number lies strictly between 0 and 1.

    Raises:
        ValueError: If the number is outside (0, 1)
    """
    validate_finite_number(value, field_name)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{field_name} must be in range (0, 1), got {value}")
    return value


def validate_odd(value: int, field_name: str = "value", minimum: int = 1) -> int:
    """Validate that an integer is odd and at least ``minimum``.

    Raises:
        ValueError: If the integer is even or too small
    """
    if value < minimum or value % 2 == 0:
        raise ValueError(f"{field_name} must be an odd integer >= {minimum}, got {value}")
    return value


def ensure_finite_array(array: np.ndarray, name: str = "array") -> np.ndarray:
    """Check that every element of an array is finite.

    Args:
        array: Array to check
        name: Name used in the error message (file, tensor or field name)

    Returns:
        The array, unchanged

    Raises:
        NumericalError: If any element is NaN or infinite
    """
    if not np.all(np.isfinite(array)):
        bad = int(np.count_nonzero(~np.isfinite(array)))
        raise NumericalError(f"{name} contains {bad} nonfinite value(s)")
    return array


def clamp(value: float, min_value: float, max_value: float) -> float:
    """Clamp a value between min and max."""
    return max(min_value, min(max_value, value))
