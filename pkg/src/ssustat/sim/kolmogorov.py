"""Kolmogorov distance between an empirical law and the standard Normal."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm

from ..exceptions import DataError


def empirical_kolmogorov(values) -> float:
    """``sup_t |F_hat(t) - Phi(t)|`` evaluated at both sides of every jump."""
    x = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if x.size == 0:
        raise DataError("Kolmogorov distance of an empty sample")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite standardized value")
    n = x.size
    phi = norm.cdf(x)
    upper = np.arange(1, n + 1) / n - phi
    lower = phi - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def gap_at(values, t) -> float:
    """Signed ``F_hat(t) - Phi(t)``."""
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise DataError("empty sample")
    return float(np.mean(x <= t) - norm.cdf(t))
