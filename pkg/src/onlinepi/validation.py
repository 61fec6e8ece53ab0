"""Input validation helpers used by the estimators and the run functions."""

from __future__ import annotations

import numpy as np


def check_series(y, min_length: int = 1) -> np.ndarray:
    """Coerce ``y`` to a finite 1-D float64 array of at least ``min_length`` values."""
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D series, got shape {arr.shape}")
    if arr.size < min_length:
        raise ValueError(f"series too short: {arr.size} values, need at least {min_length}")
    if not np.isfinite(arr).all():
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValueError(f"series contains a non-finite value at index {bad}")
    return arr


def check_window_matrix(X, window: int) -> np.ndarray:
    """Coerce ``X`` to a finite 2-D float64 array with ``window`` columns."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != window:
        raise ValueError(f"expected windows of length {window}, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("window matrix contains non-finite values")
    return arr


def check_unit_open(name: str, value: float) -> float:
    """Require ``value`` strictly inside (0, 1)."""
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie strictly in (0, 1), got {value}")
    return value


def check_unit_closed(name: str, value: float) -> float:
    """Require ``value`` inside [0, 1]."""
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_positive_int(name: str, value: int) -> int:
    value = int(value)
    if value <= 0:
        raise ValueError(f"{name} must be a positive integer, got {value}")
    return value
