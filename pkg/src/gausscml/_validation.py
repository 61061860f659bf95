"""Small input-checking helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import math
import numbers

import numpy as np

from .exceptions import LengthMismatch, ValidationError


def check_scalar(value, name, *, target_type=numbers.Real, min_val=None, max_val=None,
                 include_min=True, include_max=True):
    """Validate a scalar parameter and return it unchanged.

    Booleans are rejected even though they are ``numbers.Integral``.
    """
    if isinstance(value, bool) or not isinstance(value, target_type):
        raise ValidationError(f"{name} must be {target_type.__name__}, got {value!r}")
    if isinstance(value, numbers.Real) and not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    if min_val is not None:
        bad = value < min_val if include_min else value <= min_val
        if bad:
            op = ">=" if include_min else ">"
            raise ValidationError(f"{name} must be {op} {min_val}, got {value!r}")
    if max_val is not None:
        bad = value > max_val if include_max else value >= max_val
        if bad:
            op = "<=" if include_max else "<"
            raise ValidationError(f"{name} must be {op} {max_val}, got {value!r}")
    return value


def check_cells(cells, *, min_length=3, name="cells"):
    """Return ``cells`` as a finite float64 1-D array of length >= ``min_length``."""
    arr = np.asarray(cells, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise ValidationError(f"{name} needs at least {min_length} sites, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_same_length(a, b, names=("a", "b")):
    if len(a) != len(b):
        raise LengthMismatch(f"{names[0]} has length {len(a)} but {names[1]} has length {len(b)}")


def check_series_arrays(times, values):
    """Validate a (times, values) pair: 1-D, equal length, strictly increasing times."""
    t = np.asarray(times)
    v = np.asarray(values, dtype=np.float64)
    if t.ndim != 1 or v.ndim != 1:
        raise ValidationError("times and values must be one-dimensional")
    check_same_length(t, v, ("times", "values"))
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ValidationError("times must be strictly increasing")
    return t, v
