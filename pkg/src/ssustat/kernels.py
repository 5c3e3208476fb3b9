"""Symmetric kernels, their first projections and the generic estimator of ell_1.

A kernel of order ``r`` is stored as a vectorised function of ``r`` response
arrays, each of shape ``(N, q)``, returning ``N`` values.  Built-in kernels
also carry an analytic first projection ``ell_1(y)`` driven by auxiliary
statistics (moments or ECDFs) and, for ``r = 2``, an ``O(n log n)`` or
``O(n)`` row-sum routine used by the U-statistic code.

Tie conventions: ``sign(0) = 0`` in Kendall's kernel and the Wilcoxon
indicator is strict, so ties contribute 0.  ECDFs use ``F(t) = #{Y_i <= t}/n``.
"""

from __future__ import annotations

import difflib
import itertools
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.stats import kendalltau

from ._validation import check_responses
from .exceptions import ArityError, DataError, UnknownNameError, UnsupportedOperation


@dataclass(frozen=True)
class Ell1Stats:
    """Auxiliary statistics for an analytic ``ell_1`` (moments or CDF callables)."""

    kernel: str
    values: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", MappingProxyType(dict(self.values)))

    def __getitem__(self, key):
        return self.values[key]


@dataclass(frozen=True)
class Kernel:
    name: str
    order: int
    func: Callable
    arity: Optional[int] = 1
    ell1_stats: Optional[Callable] = None
    ell1_eval: Optional[Callable] = None
    row_sums: Optional[Callable] = None
    separable: Optional[Callable] = None
    description: str = ""
    total: Optional[Callable] = None  # fast U over all pairs; nan means "use row sums"

    def __post_init__(self):
        if self.order < 1:
            raise DataError("kernel order must be >= 1")

    @property
    def has_analytic_ell1(self):
        return self.ell1_eval is not None and self.ell1_stats is not None

    def __call__(self, *rows):
        return self.func(*rows)

    def diag(self, Y):
        """``ell(y, y)`` for every row (bivariate kernels only)."""
        if self.order != 2:
            raise UnsupportedOperation("diag is defined for order-2 kernels")
        Y = self.check_sample(Y)
        return np.asarray(self.func(Y, Y), dtype=np.float64)

    def check_sample(self, sample, name="sample"):
        return check_responses(sample, name, arity=self.arity)


# ------------------------------------------------------------------ ECDFs

class ECDF:
    """Right-continuous empirical CDF, ``F(t) = #{x_i <= t}/n``."""

    def __init__(self, sample):
        self.sorted = np.sort(np.asarray(sample, dtype=np.float64).reshape(-1))
        if self.sorted.size == 0:
            raise DataError("ECDF of an empty sample")

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        return np.searchsorted(self.sorted, t, side="right") / self.sorted.size


class BivariateECDF:
    """``F(v, w) = #{V_i <= v, W_i <= w}/n``, evaluated in row chunks."""

    def __init__(self, v, w, chunk=2048):
        self.v = np.asarray(v, dtype=np.float64).reshape(-1)
        self.w = np.asarray(w, dtype=np.float64).reshape(-1)
        if self.v.size == 0 or self.v.size != self.w.size:
            raise DataError("bivariate ECDF needs two equal-length non-empty samples")
        self.chunk = chunk

    def __call__(self, v, w):
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        w = np.atleast_1d(np.asarray(w, dtype=np.float64))
        out = np.empty(v.shape[0])
        for s in range(0, v.shape[0], self.chunk):
            vv = v[s:s + self.chunk, None]
            ww = w[s:s + self.chunk, None]
            out[s:s + self.chunk] = np.count_nonzero(
                (self.v[None, :] <= vv) & (self.w[None, :] <= ww), axis=1
            )
        return out / self.v.size


# ------------------------------------------------------- builtin kernels

def _col(a):
    return np.asarray(a, dtype=np.float64)[:, 0]


def _mean_func(a):
    return _col(a)


def _variance_func(a, b):
    return 0.5 * (_col(a) - _col(b)) ** 2


def _gini_func(a, b):
    return np.abs(_col(a) - _col(b))


def _product_func(a, b):
    return _col(a) * _col(b)


def _kendall_func(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.sign(a[:, 0] - b[:, 0]) * np.sign(a[:, 1] - b[:, 1])


def _wilcoxon_func(a, b):
    return (_col(a) + _col(b) > 0).astype(np.float64)


def _moments(sample):
    y = sample[:, 0]
    return {"mu1": float(np.mean(y)), "mu2": float(np.mean(y * y))}


def _variance_stats(sample):
    return Ell1Stats("variance", _moments(sample))


def _variance_ell1(Y, stats):
    y = Y[:, 0]
    return 0.5 * y * y - y * stats["mu1"] + 0.5 * stats["mu2"]


def _product_stats(sample):
    return Ell1Stats("product", {"mu1": float(np.mean(sample[:, 0]))})


def _product_ell1(Y, stats):
    return Y[:, 0] * stats["mu1"]


def _mean_stats(sample):
    return Ell1Stats("mean", {})


def _mean_ell1(Y, stats):
    return Y[:, 0].copy()


def _gini_stats(sample):
    s = np.sort(sample[:, 0])
    return Ell1Stats("gini", {"sorted": s, "cumsum": np.concatenate([[0.0], np.cumsum(s)])})


def _gini_ell1(Y, stats):
    # E|y - Y'| under the empirical distribution of the reference sample
    s, c = stats["sorted"], stats["cumsum"]
    y = Y[:, 0]
    k = np.searchsorted(s, y, side="right")
    n = s.size
    below = y * k - c[k]
    above = (c[n] - c[k]) - y * (n - k)
    return (below + above) / n


def _wilcoxon_stats(sample):
    return Ell1Stats("wilcoxon", {"F_Y": ECDF(sample[:, 0])})


def _wilcoxon_ell1(Y, stats):
    return 1.0 - np.asarray(stats["F_Y"](-Y[:, 0]), dtype=np.float64)


def _kendall_stats(sample):
    return Ell1Stats(
        "kendall",
        {
            "F_V": ECDF(sample[:, 0]),
            "F_W": ECDF(sample[:, 1]),
            "F_VW": BivariateECDF(sample[:, 0], sample[:, 1]),
        },
    )


def _kendall_ell1(Y, stats):
    v, w = Y[:, 0], Y[:, 1]
    fv = np.asarray(stats["F_V"](v), dtype=np.float64)
    fw = np.asarray(stats["F_W"](w), dtype=np.float64)
    fvw = np.asarray(stats["F_VW"](v, w), dtype=np.float64)
    return (1 - 2 * fv) * (1 - 2 * fw) + 4 * (fvw - fv * fw)


# Row sums s_i = sum_{j != i} ell(Y_i, Y_j) for order-2 kernels.

def _variance_rows(Y):
    y = Y[:, 0] - np.mean(Y[:, 0])
    n = y.size
    return 0.5 * (n * y * y - 2 * y * y.sum() + np.dot(y, y))


def _product_rows(Y):
    y = Y[:, 0]
    return y * (y.sum() - y)


def _gini_rows(Y):
    y = Y[:, 0]
    order = np.argsort(y, kind="stable")
    s = y[order]
    n = s.size
    c = np.concatenate([[0.0], np.cumsum(s)])
    k = np.arange(1, n + 1)
    rows_sorted = s * k - c[1:] + (c[n] - c[1:]) - s * (n - k)
    out = np.empty(n)
    out[order] = rows_sorted
    return out


def _wilcoxon_rows(Y):
    y = Y[:, 0]
    s = np.sort(y)
    greater = s.size - np.searchsorted(s, -y, side="right")
    return (greater - (2 * y > 0)).astype(np.float64)


def _kendall_rows(Y, chunk=1024):
    v, w = Y[:, 0], Y[:, 1]
    out = np.empty(v.size)
    for s in range(0, v.size, chunk):
        sv = np.sign(v[s:s + chunk, None] - v[None, :])
        sw = np.sign(w[s:s + chunk, None] - w[None, :])
        out[s:s + chunk] = np.einsum("ij,ij->i", sv, sw)
    return out


def _kendall_total(Y):
    # tau-a from scipy's O(n log n) tau-b: (P - Q) = tau_b sqrt((n0 - t_v)(n0 - t_w))
    v, w = Y[:, 0], Y[:, 1]
    n = v.size
    n0 = n * (n - 1) / 2

    def ties(x):
        _, c = np.unique(x, return_counts=True)
        return float(np.sum(c * (c - 1) / 2))

    tau_b = kendalltau(v, w, variant="b").statistic
    if not np.isfinite(tau_b):
        return float("nan")
    return float(tau_b * math.sqrt((n0 - ties(v)) * (n0 - ties(w))) / n0)


def _identity_phi(Y):
    return Y[:, 0].copy()


_REGISTRY: dict = {}


def register_kernel(kernel: Kernel, *, overwrite=False):
    """Add a kernel to the name registry used by :func:`get_kernel` and the CLI."""
    if kernel.name in _REGISTRY and not overwrite:
        raise DataError(f"kernel {kernel.name!r} already registered")
    _REGISTRY[kernel.name] = kernel
    return kernel


def get_kernel(name) -> Kernel:
    if isinstance(name, Kernel):
        return name
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownNameError(
            "kernel", name, difflib.get_close_matches(str(name), list(_REGISTRY), n=3, cutoff=0.4)
            or sorted(_REGISTRY)
        ) from None


def kernel_names():
    return sorted(_REGISTRY)


MEAN = register_kernel(Kernel(
    "mean", 1, _mean_func, 1, _mean_stats, _mean_ell1,
    description="ell(y) = y; the sample mean",
))
VARIANCE = register_kernel(Kernel(
    "variance", 2, _variance_func, 1, _variance_stats, _variance_ell1, _variance_rows,
    description="ell = (y1 - y2)^2 / 2; unbiased variance",
))
GINI = register_kernel(Kernel(
    "gini", 2, _gini_func, 1, _gini_stats, _gini_ell1, _gini_rows,
    description="ell = |y1 - y2|; Gini mean difference",
))
PRODUCT = register_kernel(Kernel(
    "product", 2, _product_func, 1, _product_stats, _product_ell1, _product_rows,
    separable=_identity_phi,
    description="ell = y1 * y2; estimates the squared mean",
))
KENDALL = register_kernel(Kernel(
    "kendall", 2, _kendall_func, 2, _kendall_stats, _kendall_ell1, _kendall_rows,
    description="ell = sign(v1 - v2) sign(w1 - w2); Kendall's tau, response (v, w)",
    total=_kendall_total,
))
WILCOXON = register_kernel(Kernel(
    "wilcoxon", 2, _wilcoxon_func, 1, _wilcoxon_stats, _wilcoxon_ell1, _wilcoxon_rows,
    description="ell = 1(y1 + y2 > 0); signed-rank U-statistic",
))


# -------------------------------------------------------------- operations

def eval_kernel(k, rows) -> float:
    """Evaluate ``k`` on exactly ``r`` response rows."""
    k = get_kernel(k)
    arr = np.asarray(rows, dtype=np.float64)
    if k.arity == 1 and arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] != k.order:
        raise ArityError(f"kernel {k.name!r} takes {k.order} rows, got shape {arr.shape}")
    if k.arity is not None and arr.shape[1] != k.arity:
        raise ArityError(f"kernel {k.name!r} takes rows of width {k.arity}, got {arr.shape[1]}")
    return float(k.func(*[arr[i:i + 1] for i in range(k.order)])[0])


def ell1_hat_generic_many(k, Y, sample):
    """Vector of ``ell1_hat(y)`` for every row of ``Y`` against ``sample``.

    The average over ordered (r-1)-tuples equals the average over
    (r-1)-subsets because the kernel is symmetric.
    """
    k = get_kernel(k)
    Y = k.check_sample(Y, "y")
    S = k.check_sample(sample) if k.order > 1 else np.empty((0, Y.shape[1]))
    r = k.order
    if r == 1:
        return np.asarray(k.func(Y), dtype=np.float64)
    if S.shape[0] < r - 1:
        raise DataError(f"reference sample has {S.shape[0]} rows; need >= {r - 1}")
    out = np.empty(Y.shape[0])
    if r == 2:
        ns = S.shape[0]
        for i in range(Y.shape[0]):
            out[i] = math.fsum(k.func(np.repeat(Y[i:i + 1], ns, axis=0), S)) / ns
        return out
    combos = np.array(list(itertools.combinations(range(S.shape[0]), r - 1)), dtype=np.intp)
    args = [S[combos[:, c]] for c in range(r - 1)]
    for i in range(Y.shape[0]):
        yi = np.repeat(Y[i:i + 1], combos.shape[0], axis=0)
        out[i] = math.fsum(k.func(yi, *args)) / combos.shape[0]
    return out


def ell1_hat_generic(k, y, sample) -> float:
    """Unbiased ``ell1_hat(y)``: mean of ``ell(y, Y_i1, ..., Y_i(r-1))`` over the sample."""
    k = get_kernel(k)
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    return float(ell1_hat_generic_many(k, y, sample)[0])


def ell1_stats(k, sample) -> Ell1Stats:
    k = get_kernel(k)
    if not k.has_analytic_ell1:
        raise UnsupportedOperation(f"kernel {k.name!r} has no analytic ell_1")
    return k.ell1_stats(k.check_sample(sample))


def ell1_analytic_many(k, Y, stats: Ell1Stats):
    k = get_kernel(k)
    if not k.has_analytic_ell1:
        raise UnsupportedOperation(f"kernel {k.name!r} has no analytic ell_1")
    if stats.kernel != k.name:
        raise DataError(f"stats were built for {stats.kernel!r}, not {k.name!r}")
    return np.asarray(k.ell1_eval(k.check_sample(Y, "y"), stats), dtype=np.float64)


def ell1_analytic(k, y, stats: Ell1Stats) -> float:
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    return float(ell1_analytic_many(k, y, stats)[0])
