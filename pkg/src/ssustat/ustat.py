"""Classical U-statistics, leave-one-out values and the Jackknife variance."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DataError
from .kernels import Kernel, get_kernel

# Default sample-size caps per kernel order (enumeration is O(n^r)).
SIZE_CAPS = {1: None, 2: 5000, 3: 300}
SIZE_CAP_HIGH_ORDER = 80


@dataclass(frozen=True)
class UStatResult:
    value: float
    n: int
    r: int
    leave_one_out: Optional[np.ndarray] = None


def size_cap(r):
    return SIZE_CAPS.get(r, SIZE_CAP_HIGH_ORDER)


def _prepare(k, sample, max_n, extra=0):
    k = get_kernel(k)
    Y = k.check_sample(sample)
    n, r = Y.shape[0], k.order
    if n < r + extra:
        raise DataError(f"need at least {r + extra} rows for order-{r} kernel, got {n}")
    cap = size_cap(r) if max_n is None else max_n
    if cap is not None and n > cap:
        raise DataError(
            f"n={n} exceeds the size cap {cap} for order {r}; pass max_n to override"
        )
    return k, Y, n, r


def pair_row_sums(k: Kernel, Y, chunk=1024):
    """``s_i = sum_{j != i} ell(Y_i, Y_j)`` for an order-2 kernel."""
    if k.row_sums is not None:
        return np.asarray(k.row_sums(Y), dtype=np.float64)
    n = Y.shape[0]
    out = np.empty(n)
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        a = np.repeat(Y[s:e], n, axis=0)
        b = np.tile(Y, (e - s, 1))
        vals = np.asarray(k.func(a, b), dtype=np.float64).reshape(e - s, n)
        vals[np.arange(e - s), np.arange(s, e)] = 0.0
        out[s:e] = vals.sum(axis=1)
    return out


def _combination_values(k, Y):
    n, r = Y.shape[0], k.order
    combos = np.array(list(itertools.combinations(range(n), r)), dtype=np.intp)
    vals = np.asarray(k.func(*[Y[combos[:, c]] for c in range(r)]), dtype=np.float64)
    return combos, vals


def u_statistic(k, sample, *, max_n=None) -> float:
    """Average of the kernel over all ``C(n, r)`` unordered ``r``-subsets."""
    k, Y, n, r = _prepare(k, sample, max_n)
    if r == 1:
        return math.fsum(np.asarray(k.func(Y), dtype=np.float64)) / n
    if r == 2:
        if k.total is not None:
            fast = k.total(Y)
            if np.isfinite(fast):
                return float(fast)
        return math.fsum(pair_row_sums(k, Y)) / (n * (n - 1))
    _, vals = _combination_values(k, Y)
    return math.fsum(vals) / vals.size


def u_leave_one_out(k, sample, *, max_n=None) -> np.ndarray:
    """``U^{(i)}``: the U-statistic with row ``i`` removed, for every ``i``."""
    k, Y, n, r = _prepare(k, sample, max_n, extra=1)
    if r == 1:
        v = np.asarray(k.func(Y), dtype=np.float64)
        return (math.fsum(v) - v) / (n - 1)
    if r == 2:
        rows = pair_row_sums(k, Y)
        total = math.fsum(rows) / 2.0
        return (total - rows) / math.comb(n - 1, 2)
    combos, vals = _combination_values(k, Y)
    touched = np.zeros(n)
    np.add.at(touched, combos.ravel(), np.repeat(vals, r))
    return (math.fsum(vals) - touched) / math.comb(n - 1, r)


def u_statistic_result(k, sample, *, leave_one_out=False, max_n=None) -> UStatResult:
    k = get_kernel(k)
    Y = k.check_sample(sample)
    value = u_statistic(k, Y, max_n=max_n)
    loo = u_leave_one_out(k, Y, max_n=max_n) if leave_one_out else None
    if loo is not None:
        loo.setflags(write=False)
    return UStatResult(value, Y.shape[0], k.order, loo)


def jackknife_sigma2(k, sample, *, max_n=None, u=None) -> float:
    """``((n-1)/r^2) * sum_i (U^{(i)} - U)^2``; estimates ``Var ell_1(Y)``."""
    k = get_kernel(k)
    Y = k.check_sample(sample)
    loo = u_leave_one_out(k, Y, max_n=max_n)
    n, r = Y.shape[0], k.order
    if u is None:
        u = u_statistic(k, Y, max_n=max_n)
    dev = loo - u
    return float((n - 1) / r**2 * math.fsum(dev * dev))
