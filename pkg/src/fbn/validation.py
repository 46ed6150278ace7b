"""Input validation helpers shared by every stage of the toolkit.

All numeric pipeline code runs in 64-bit floating point regardless of
on-disk storage precision, so the coercion helpers here always promote
to float64.
"""

from __future__ import annotations

import numpy as np


class DegenerateInputError(ValueError):
    """Input is mathematically degenerate (zero variance, |r| >= 1, ...).

    Raised instead of silently propagating NaN/inf through the pipeline.
    """


def as_float_array(x, name: str = "array", ndim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite float64 ndarray, optionally checking ndim."""
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "inputs") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} have mismatched shapes {a.shape} vs {b.shape}")


def check_series_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Validate two equal-length 1-D series of length >= 2."""
    a = as_float_array(a, "first series", ndim=1)
    b = as_float_array(b, "second series", ndim=1)
    if a.shape != b.shape:
        raise ValueError(f"series lengths differ: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError(f"series must have length >= 2, got {a.size}")
    return a, b


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value
