"""Input validation helpers shared across the package."""

from __future__ import annotations

import math
from numbers import Integral, Real

import numpy as np


class PhaseError(RuntimeError):
    """Raised when suggest/observe calls do not strictly alternate."""


class SnapshotError(ValueError):
    """Raised when a persisted document cannot be restored."""


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive_real(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def check_finite_scalar(value, name: str = "value") -> float:
    if isinstance(value, bool) or not isinstance(value, Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value


def check_vector(x, size: int, name: str = "x") -> np.ndarray:
    """Return ``x`` as a finite float vector of length ``size``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != size:
        raise ValueError(f"{name} must have shape ({size},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_square(M, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(M, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_index(index, shape: tuple[int, ...]) -> tuple[int, ...]:
    """Validate a configuration multi-index against a grid shape."""
    try:
        index = tuple(index)
    except TypeError:
        raise TypeError(f"configuration index must be a sequence, got {index!r}") from None
    if len(index) != len(shape):
        raise ValueError(f"configuration index has length {len(index)}, expected {len(shape)}")
    out = []
    for i, (a, d) in enumerate(zip(index, shape)):
        if isinstance(a, bool) or not isinstance(a, (Integral, np.integer)):
            raise TypeError(f"index component {i} must be an integer, got {a!r}")
        if not 0 <= a < d:
            raise IndexError(f"index component {i}={a} out of range [0, {d})")
        out.append(int(a))
    return tuple(out)
