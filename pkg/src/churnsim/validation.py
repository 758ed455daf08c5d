"""Shared argument validation helpers.

All public entry points funnel their scalar/array checks through these
so error messages stay uniform and the call sites stay short.
"""

import numbers

import numpy as np


def check_finite_scalar(value, name: str) -> float:
    """Require a finite real number; return it as float."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value


def check_non_negative(value, name: str) -> float:
    value = check_finite_scalar(value, name)
    if value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return value


def check_positive(value, name: str) -> float:
    value = check_finite_scalar(value, name)
    if value <= 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return value


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value <= 0:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return value


def check_vector(values, name: str, *, allow_empty: bool = False) -> np.ndarray:
    """Coerce to a finite 1-D float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ValueError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def check_unit_interval_vector(values, name: str) -> np.ndarray:
    arr = check_vector(values, name)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_mask(mask, n: int, name: str = "mask") -> np.ndarray:
    """Coerce to a boolean vector of length n with at least one True."""
    arr = np.asarray(mask)
    if arr.dtype != np.bool_:
        raise TypeError(f"{name} must be boolean, got dtype {arr.dtype}")
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    if not arr.any():
        raise ValueError(f"{name} must select at least one level")
    return arr.copy()
