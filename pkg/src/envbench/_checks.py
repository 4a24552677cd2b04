"""Input validation helpers used by the estimators and free functions."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import GeometryError


def check_points_2d(X, name="points", min_points=1):
    """Return ``X`` as a finite float64 array of shape (n, 2)."""
    try:
        X = check_array(X, dtype=np.float64, ensure_min_samples=min_points)
    except ValueError as exc:
        raise GeometryError(f"{name}: {exc}") from None
    if X.shape[1] != 2:
        raise GeometryError(f"{name}: expected 2 columns, got {X.shape[1]}")
    return X


def check_vector(values, name="values", min_length=1):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.size < min_length:
        raise ValueError(f"{name}: need at least {min_length} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite values")
    return arr


def unique_rows(X):
    """Exact-equality deduplication; returns (unique, inverse) in sorted order."""
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    return uniq, inverse.ravel()
