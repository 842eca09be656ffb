"""Input checks shared by the estimators and the command line."""

import numpy as np
from sklearn.utils.validation import check_array

from .core import ProblemError


def check_points(points):
    """Return ``points`` as a finite ``(m, 2)`` float array."""
    try:
        arr = check_array(points, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    except ValueError as exc:
        raise ProblemError(str(exc)) from None
    if arr.shape[1] != 2:
        raise ProblemError(f"points must have two columns, got {arr.shape[1]}")
    return arr


def check_positive(name, value, allow_none=False):
    if value is None and allow_none:
        return None
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ProblemError(f"{name} must be a number, got {value!r}") from None
    if not np.isfinite(v) or v <= 0:
        raise ProblemError(f"{name} must be positive, got {value!r}")
    return v


def check_int_range(name, value, lo, hi):
    if isinstance(value, bool) or int(value) != value:
        raise ProblemError(f"{name} must be an integer, got {value!r}")
    v = int(value)
    if not lo <= v <= hi:
        raise ProblemError(f"{name} must lie in [{lo}, {hi}], got {v}")
    return v
