"""Regressors for the assistant function and the nested regression procedure.

Every regressor is a scikit-learn style estimator (``fit``/``predict``,
``get_params``/``set_params``, ``clone``-able).  ``knn`` and ``partition``
are linear smoothers and expose :meth:`smoother_weights`.
"""

from __future__ import annotations

import re

import numpy as np
from scipy import linalg as sla
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_is_fitted

from ._validation import check_covariates, check_scores
from .data import CrossFitSplit, SemiDataset, split_nested
from .exceptions import (
    ConfigError,
    DataError,
    FoldTooSmallError,
    UnknownNameError,
    UnsupportedOperation,
)
from .kernels import ell1_analytic_many, ell1_hat_generic_many, ell1_stats, get_kernel


class _BaseRegressor(RegressorMixin, BaseEstimator):
    is_smoother = False

    def _validate_fit(self, X, z):
        X = check_covariates(X, "X")
        z = check_scores(z, X.shape[0], "z")
        self.n_features_in_ = X.shape[1]
        self.n_train_ = X.shape[0]
        return X, z

    def _validate_query(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_covariates(X, "X", allow_empty=True)
        if X.shape[0] == 0:
            return np.empty((0, self.n_features_in_))
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"query has {X.shape[1]} covariates, model was fitted on {self.n_features_in_}"
            )
        return X

    def smoother_weights(self, x):
        raise UnsupportedOperation(f"{type(self).__name__} is not a linear smoother")


class ConstantRegressor(_BaseRegressor):
    """Predicts ``value`` everywhere (the training mean when ``value`` is None)."""

    def __init__(self, value=0.0):
        self.value = value

    def fit(self, X, z):
        X, z = self._validate_fit(X, z)
        self.constant_ = float(np.mean(z)) if self.value is None else float(self.value)
        return self

    def predict(self, X):
        X = self._validate_query(X)
        return np.full(X.shape[0], self.constant_)


def _k_smallest(d2, k):
    """Sorted column indices of the ``k`` smallest entries per row; ties go to lower indices."""
    if k == d2.shape[1]:
        return np.broadcast_to(np.arange(k), d2.shape).copy()
    kth = np.partition(d2, k - 1, axis=1)[:, k - 1:k]
    less = d2 < kth
    eq = d2 == kth
    need = k - less.sum(axis=1, keepdims=True)
    chosen = less | (eq & (np.cumsum(eq, axis=1) <= need))
    return np.nonzero(chosen)[1].reshape(-1, k)


class KNNRegressor(_BaseRegressor):
    """k-nearest-neighbour average; Euclidean distance, ties to the lower index."""

    is_smoother = True

    def __init__(self, k=5, brute_limit=100_000):
        self.k = k
        self.brute_limit = brute_limit

    def fit(self, X, z):
        X, z = self._validate_fit(X, z)
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ConfigError(f"knn k must be a positive integer, got {self.k!r}")
        if self.k > X.shape[0]:
            raise DataError(f"knn k={self.k} exceeds the training size {X.shape[0]}")
        self.X_train_ = X.copy()
        self.z_train_ = z.copy()
        self.tree_ = cKDTree(self.X_train_)
        return self

    def _brute(self, Q):
        k, n = self.k, self.X_train_.shape[0]
        chunk = max(1, 4_000_000 // max(1, n * self.n_features_in_))
        out = np.empty((Q.shape[0], k), dtype=np.intp)
        for s in range(0, Q.shape[0], chunk):
            diff = Q[s:s + chunk, None, :] - self.X_train_[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            out[s:s + chunk] = _k_smallest(d2, k)
        return out

    def neighbors(self, X):
        """Indices of the ``k`` nearest training points for each query row."""
        Q = self._validate_query(X)
        n, k = self.X_train_.shape[0], self.k
        if Q.shape[0] * n <= self.brute_limit or k + 1 > n:
            return self._brute(Q)
        dist, idx = self.tree_.query(Q, k=k + 1)
        out = np.sort(idx[:, :k], axis=1)
        tied = dist[:, k - 1] == dist[:, k]
        if np.any(tied):
            out[tied] = self._brute(Q[tied])
        return out

    def predict(self, X):
        idx = self.neighbors(X)
        return self.z_train_[idx].mean(axis=1)

    def smoother_weights(self, x):
        idx = self.neighbors(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
        w = np.zeros(self.X_train_.shape[0])
        w[idx] = 1.0 / self.k
        return w


class PartitionRegressor(_BaseRegressor):
    """Equal-width axis-aligned bins over the training range (``d <= 3``).

    Out-of-range queries clamp to the boundary bin.  An empty bin predicts
    the global training mean.
    """

    is_smoother = True
    max_dim = 3

    def __init__(self, bins=8, range=None):
        self.bins = bins
        self.range = range

    def fit(self, X, z):
        X, z = self._validate_fit(X, z)
        if isinstance(self.bins, bool) or not isinstance(self.bins, (int, np.integer)) or self.bins < 1:
            raise ConfigError(f"partition bins must be a positive integer, got {self.bins!r}")
        d = X.shape[1]
        if d > self.max_dim:
            raise ConfigError(f"partition regressor supports d <= {self.max_dim}, got d={d}")
        if self.range is None:
            lo, hi = X.min(axis=0), X.max(axis=0)
        else:
            bounds = np.asarray(self.range, dtype=np.float64).reshape(d, 2)
            lo, hi = bounds[:, 0], bounds[:, 1]
            if np.any(hi < lo):
                raise ConfigError("partition range needs low <= high in every dimension")
        self.low_, self.high_ = lo, hi
        self.X_train_ = X.copy()
        self.z_train_ = z.copy()
        self.train_bin_ = self._bin_of(X)
        nb = self.bins ** d
        self.counts_ = np.bincount(self.train_bin_, minlength=nb)
        sums = np.bincount(self.train_bin_, weights=z, minlength=nb)
        self.global_mean_ = float(np.mean(z))
        with np.errstate(invalid="ignore", divide="ignore"):
            self.bin_means_ = np.where(self.counts_ > 0, sums / np.maximum(self.counts_, 1),
                                       self.global_mean_)
        return self

    def _bin_of(self, X):
        width = self.high_ - self.low_
        safe = np.where(width > 0, width, 1.0)
        pos = np.floor((X - self.low_) / safe * self.bins).astype(np.int64)
        pos = np.clip(pos, 0, self.bins - 1)
        pos[:, width <= 0] = 0
        flat = np.zeros(X.shape[0], dtype=np.int64)
        for j in range(X.shape[1]):
            flat = flat * self.bins + pos[:, j]
        return flat

    def predict(self, X):
        X = self._validate_query(X)
        return self.bin_means_[self._bin_of(X)]

    def smoother_weights(self, x):
        Q = self._validate_query(np.asarray(x, dtype=np.float64).reshape(1, -1))
        b = self._bin_of(Q)[0]
        n = self.z_train_.size
        if self.counts_[b] == 0:
            return np.full(n, 1.0 / n)
        return (self.train_bin_ == b).astype(np.float64) / self.counts_[b]


class OLSRegressor(_BaseRegressor):
    """Least squares with intercept via SVD; ridge fallback when rank-deficient."""

    def __init__(self, fit_intercept=True):
        self.fit_intercept = fit_intercept

    def _design(self, X):
        return np.hstack([np.ones((X.shape[0], 1)), X]) if self.fit_intercept else X

    def fit(self, X, z):
        X, z = self._validate_fit(X, z)
        A = self._design(X)
        p = A.shape[1]
        beta, _, rank, _ = np.linalg.lstsq(A, z, rcond=None)
        self.ridge_fallback_ = bool(rank < p)
        if self.ridge_fallback_:
            G = A.T @ A
            lam = 1e-8 * np.trace(G) / p
            if lam <= 0:
                lam = 1e-8
            beta = sla.solve(G + lam * np.eye(p), A.T @ z, assume_a="pos")
        self.beta_ = beta
        self.intercept_ = float(beta[0]) if self.fit_intercept else 0.0
        self.coef_ = beta[1:] if self.fit_intercept else beta
        return self

    def predict(self, X):
        X = self._validate_query(X)
        return X @ self.coef_ + self.intercept_


class KernelRidgeRegressor(_BaseRegressor):
    """Gaussian-kernel ridge: minimise ``mean (z - f)^2 + lam ||f||_H^2``.

    The representer solution solves ``(K + n lam I) a = z``; no intercept.
    ``bandwidth='auto'`` uses the median pairwise training distance.
    """

    def __init__(self, lam=0.01, bandwidth="auto"):
        self.lam = lam
        self.bandwidth = bandwidth

    def fit(self, X, z):
        X, z = self._validate_fit(X, z)
        if not self.lam > 0:
            raise ConfigError(f"kernel ridge lambda must be > 0, got {self.lam!r}")
        if self.bandwidth in (None, "auto"):
            dist = pdist(X) if X.shape[0] > 1 else np.array([])
            med = float(np.median(dist)) if dist.size else 0.0
            self.bandwidth_ = med if med > 0 else 1.0
        else:
            self.bandwidth_ = float(self.bandwidth)
            if not self.bandwidth_ > 0:
                raise ConfigError(f"bandwidth must be > 0, got {self.bandwidth!r}")
        n = X.shape[0]
        K = self._gram(X, X)
        self.dual_coef_ = sla.solve(K + n * self.lam * np.eye(n), z, assume_a="pos")
        self.X_train_ = X.copy()
        return self

    def _gram(self, A, B):
        d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
        return np.exp(-np.maximum(d2, 0.0) / (2 * self.bandwidth_ ** 2))

    def predict(self, X):
        X = self._validate_query(X)
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], 4096):
            out[s:s + 4096] = self._gram(X[s:s + 4096], self.X_train_) @ self.dual_coef_
        return out


# ------------------------------------------------------------ spec strings

REGRESSORS = {
    "knn": (KNNRegressor, {"k": ("k", int)}),
    "partition": (PartitionRegressor, {"bins": ("bins", int)}),
    "ols": (OLSRegressor, {}),
    "ridge": (KernelRidgeRegressor, {"lambda": ("lam", float), "bw": ("bandwidth", "bw")}),
    "const": (ConstantRegressor, {"value": ("value", float)}),
}
_ALIASES = {"kernel_ridge": "ridge", "zero": "const"}


def regressor_names():
    return sorted(REGRESSORS)


def parse_regressor(text):
    """Build a regressor from ``'knn:k=5'``, ``'ols'``, ``'ridge:lambda=0.01,bw=auto'`` ...

    Estimator instances are returned unchanged.
    """
    if isinstance(text, BaseEstimator):
        return text
    text = str(text).strip()
    name, _, rest = text.partition(":")
    name = _ALIASES.get(name.strip().lower(), name.strip().lower())
    if name not in REGRESSORS:
        import difflib

        raise UnknownNameError("regressor", name,
                               difflib.get_close_matches(name, list(REGRESSORS)) or regressor_names())
    cls, params = REGRESSORS[name]
    kwargs = {}
    if name == "const":
        kwargs["value"] = 0.0
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq or key not in params:
            raise ConfigError(f"bad parameter {item!r} for regressor {name!r}; "
                              f"allowed: {sorted(params) or 'none'}")
        attr, conv = params[key]
        val = val.strip()
        try:
            if conv == "bw":
                kwargs[attr] = "auto" if val == "auto" else float(val)
            elif conv is int:
                if not re.fullmatch(r"[+-]?\d+", val):
                    raise ValueError
                kwargs[attr] = int(val)
            else:
                kwargs[attr] = float(val)
        except ValueError:
            raise ConfigError(f"cannot parse {key}={val!r} for regressor {name!r}") from None
    return cls(**kwargs)


def describe_regressor(est):
    """Inverse of :func:`parse_regressor` for the built-in classes."""
    for name, (cls, params) in REGRESSORS.items():
        if type(est) is cls:
            parts = []
            for key, (attr, _) in params.items():
                parts.append(f"{key}={getattr(est, attr)}")
            return name + (":" + ",".join(parts) if parts else "")
    return repr(est)


def fit_regressor(spec, X, z):
    """Fresh clone of ``spec`` fitted on ``(X, z)``."""
    return clone(parse_regressor(spec)).fit(X, z)


def smoother_weights(model, x):
    fn = getattr(model, "smoother_weights", None)
    if fn is None:
        raise UnsupportedOperation(f"{type(model).__name__} is not a linear smoother")
    return fn(x)


# ----------------------------------------------------- nested regression

def nested_targets(ds: SemiDataset, split: CrossFitSplit, fold, k, use_analytic_ell1=True):
    """Training rows and ``ell1_hat`` targets used to fit ``f_hat`` on one fold."""
    k = get_kernel(k)
    idx = split.labeled(fold)
    Y = ds.labeled_y
    if use_analytic_ell1:
        if idx.size < 2:
            raise FoldTooSmallError(f"fold {fold} has {idx.size} labeled rows; need >= 2")
        stats = ell1_stats(k, Y[idx])
        return idx, ell1_analytic_many(k, Y[idx], stats)
    if idx.size < k.order:
        raise FoldTooSmallError(f"fold {fold} has {idx.size} labeled rows; need >= {k.order}")
    if k.order == 1:
        return idx, ell1_hat_generic_many(k, Y[idx], Y[idx])
    nest = split_nested(split, fold)
    if nest.part_a.size < k.order - 1:
        raise FoldTooSmallError(
            f"part_a of fold {fold} has {nest.part_a.size} rows; need >= {k.order - 1}"
        )
    return nest.part_b, ell1_hat_generic_many(k, Y[nest.part_b], Y[nest.part_a])


def nested_fit_f(ds: SemiDataset, split: CrossFitSplit, fold, k, spec, use_analytic_ell1=True):
    """Fit ``f_hat`` on one fold by regressing ``ell1_hat(Y)`` on ``X``.

    Analytic path: statistics for ``ell1_hat`` come from the fold's labeled
    responses and the regression uses the whole fold.  Generic path:
    ``ell1_hat`` is computed against ``part_a`` and the regression runs on
    ``part_b`` (labeled rows only).
    """
    rows, targets = nested_targets(ds, split, fold, k, use_analytic_ell1)
    return fit_regressor(spec, ds.labeled_x[rows], targets)


def default_use_analytic(k):
    return get_kernel(k).has_analytic_ell1
