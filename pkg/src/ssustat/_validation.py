"""Input-validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DataError


def check_covariates(X, name="X", *, allow_empty=False, n_features=None):
    """Return ``X`` as a finite float64 matrix of shape (rows, d)."""
    try:
        arr = check_array(
            X,
            dtype=np.float64,
            ensure_2d=False,
            ensure_min_samples=0,
            ensure_all_finite=True,
            input_name=name,
        )
    except ValueError as exc:
        raise DataError(f"{name}: {exc}") from None
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DataError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not allow_empty and arr.shape[0] == 0:
        raise DataError(f"{name} has zero rows")
    if n_features is not None and arr.shape[0] > 0 and arr.shape[1] != n_features:
        raise DataError(
            f"{name} has {arr.shape[1]} columns, expected {n_features}"
        )
    return arr


def check_responses(y, name="y", *, arity=None):
    """Return responses as a finite float64 matrix of shape (n, q)."""
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if arity in (None, 1) else arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DataError(f"{name} must be 1- or 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    if arity is not None and arr.shape[1] != arity:
        raise DataError(f"{name} has {arr.shape[1]} response columns, expected {arity}")
    return arr


def check_scores(s, size, name="scores"):
    arr = np.asarray(s, dtype=np.float64).reshape(-1)
    if arr.shape[0] != size:
        raise DataError(f"{name} has length {arr.shape[0]}, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def check_alpha(alpha):
    if not isinstance(alpha, numbers.Real) or not 0.0 < float(alpha) < 1.0:
        raise DataError(f"alpha must lie in (0, 1), got {alpha!r}")
    return float(alpha)


def check_count(value, name, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DataError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise DataError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def as_score_function(f):
    """Wrap a callable or fitted regressor into ``X -> 1-d float array``."""
    predict = getattr(f, "predict", None)
    fn = predict if callable(predict) else f
    if not callable(fn):
        raise DataError("assistant function must be callable or expose predict()")

    def score(X):
        out = np.asarray(fn(X), dtype=np.float64).reshape(-1)
        if out.shape[0] != np.shape(X)[0]:
            raise DataError("assistant function returned the wrong number of scores")
        return out

    return score
