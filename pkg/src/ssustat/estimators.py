"""Semi-supervised U-statistics, their variance estimates and confidence intervals.

All estimators share one correction: given assistant scores ``s_i = f(X_i)``
on the ``n`` labeled and ``m`` unlabeled rows,

    point = U - (r/n) sum_{i<=n} s_i + (r/(n+m)) sum_{i<=n+m} s_i.

They differ only in how ``f`` is obtained (known, cross-fitted, plug-in, or
trained elsewhere).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator

from ._validation import as_score_function, check_alpha, check_scores
from .data import SemiDataset, split_crossfit
from .exceptions import DataError, FoldTooSmallError, NumericalFailure
from .kernels import ell1_analytic_many, ell1_hat_generic_many, ell1_stats, get_kernel
from .regress import default_use_analytic, fit_regressor, nested_fit_f, parse_regressor
from .ustat import jackknife_sigma2, pair_row_sums, u_statistic

LAMBDA_FLOOR = 1e-12


@dataclass(frozen=True)
class MomentSummary:
    """Population moments entering the asymptotic variance.

    ``var_ell1 = sigma1_sq + sigma2_sq`` where ``sigma2_sq = Var psi_1(X)`` and
    ``sigma1_sq = E Var(ell_1(Y) | X)``.
    """

    var_ell1: float
    var_f: float
    cov_f_psi1: float
    sigma1_sq: Optional[float] = None
    sigma2_sq: Optional[float] = None

    @classmethod
    def at_psi1(cls, sigma1_sq, sigma2_sq):
        """Moments for the optimal assistant ``f = psi_1``."""
        return cls(sigma1_sq + sigma2_sq, sigma2_sq, sigma2_sq, sigma1_sq, sigma2_sq)


@dataclass(frozen=True)
class LambdaHat:
    lambda_hat: float
    sigma2_hat: float
    tau_hat: float
    clamped: bool


@dataclass
class Estimate:
    point: float
    lambda_hat: float
    ci_low: float
    ci_high: float
    alpha: float
    n: int
    m: int
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def std_error(self):
        return math.sqrt(self.lambda_hat / self.n)

    def to_dict(self):
        return asdict(self)


# ------------------------------------------------------------ core display

def corrected_point(u, r, scores, n):
    """``U - (r/n) sum_lab s + (r/(n+m)) sum_all s`` for stacked scores."""
    s = np.asarray(scores, dtype=np.float64)
    lab = math.fsum(s[:n]) / n
    allm = math.fsum(s) / s.size
    return u - r * lab + r * allm


def _score_all(ds, f):
    fn = as_score_function(f)
    return np.concatenate([fn(ds.labeled_x), fn(ds.unlabeled_x) if ds.m else np.empty(0)])


def u_oracle(ds: SemiDataset, k, f, *, u=None, max_n=None) -> float:
    """Semi-supervised U-statistic with a known assistant function ``f``."""
    k = get_kernel(k)
    if ds.n < k.order:
        raise DataError(f"need n >= r = {k.order}, got n={ds.n}")
    if u is None:
        u = u_statistic(k, ds.labeled_y, max_n=max_n)
    return corrected_point(u, k.order, _score_all(ds, f), ds.n)


# ----------------------------------------------------- variance estimation

def ell1_hat_labeled(ds: SemiDataset, k, generic=False):
    """``ell1_hat(Y_i)`` on the labeled rows, as used inside ``tau_hat``.

    Analytic path: per-kernel formula with statistics from all labeled
    responses.  Generic path: average of the kernel against the other
    labeled rows.
    """
    k = get_kernel(k)
    Y = ds.labeled_y
    if not generic and k.has_analytic_ell1:
        return ell1_analytic_many(k, Y, ell1_stats(k, Y))
    n = Y.shape[0]
    if k.order == 1:
        return np.asarray(k.func(Y), dtype=np.float64)
    if k.order == 2:
        return pair_row_sums(k, Y) / (n - 1)
    out = np.empty(n)
    for i in range(n):
        others = np.delete(Y, i, axis=0)
        out[i] = ell1_hat_generic_many(k, Y[i:i + 1], others)[0]
    return out


def lambda_from_parts(n, m, r, sigma2_hat, resid_var):
    """``r^2 sigma2 + r^2 m tau/(n+m)`` with ``tau = resid_var - sigma2``, floored."""
    tau = resid_var - sigma2_hat
    raw = r * r * sigma2_hat + r * r * m * tau / (n + m)
    clamped = not raw >= LAMBDA_FLOOR
    return LambdaHat(LAMBDA_FLOOR if clamped else float(raw), float(sigma2_hat), float(tau), clamped)


def lambda_hat(ds: SemiDataset, k, scores_labeled, *, generic_ell1=False, u=None,
               ell1_values=None, max_n=None) -> LambdaHat:
    """Jackknife-based estimate of the asymptotic variance scale.

    ``scores_labeled`` are the assistant scores on the labeled rows (the same
    cross-fitted scores used by the point estimate).
    """
    k = get_kernel(k)
    n, m, r = ds.n, ds.m, k.order
    s = check_scores(scores_labeled, n, "scores_labeled")
    sigma2 = jackknife_sigma2(k, ds.labeled_y, u=u, max_n=max_n)
    e1 = ell1_hat_labeled(ds, k, generic_ell1) if ell1_values is None else np.asarray(ell1_values)
    d = s - e1
    resid = float(np.mean((d - d.mean()) ** 2))
    return lambda_from_parts(n, m, r, sigma2, resid)


def confidence_interval(point, lambda_hat, n, alpha=0.05):
    """``point -/+ z_{1-alpha/2} sqrt(lambda_hat/n)``."""
    alpha = check_alpha(alpha)
    if lambda_hat < 0 or not np.isfinite(lambda_hat):
        raise DataError(f"lambda_hat must be finite and >= 0, got {lambda_hat}")
    if n < 1:
        raise DataError("n must be >= 1")
    half = norm.ppf(1 - alpha / 2) * math.sqrt(lambda_hat / n)
    return point - half, point + half


def lambda_nm_f(n, m, r, moments: MomentSummary) -> float:
    """``r^2 Var ell_1 + (r^2 m/(n+m)) [Var f - 2 Cov(f, psi_1)]``."""
    return r * r * moments.var_ell1 + r * r * m / (n + m) * (
        moments.var_f - 2 * moments.cov_f_psi1
    )


def _cov_ratio(ell1, f):
    ell1 = np.asarray(ell1, dtype=np.float64).reshape(-1)
    f = np.asarray(f, dtype=np.float64).reshape(-1)
    if ell1.shape != f.shape or ell1.size < 2:
        raise DataError("need two equal-length samples of size >= 2")
    fc = f - f.mean()
    var = float(np.dot(fc, fc))
    if not var > 1e-300 * f.size:
        raise NumericalFailure("assistant scores have zero variance")
    return float(np.dot(ell1 - ell1.mean(), fc) / var)


def improvement_ratio(ell1, f):
    """``Cov(ell_1, f)/Var f``; above 1/2 means the correction reduces variance."""
    return _cov_ratio(ell1, f)


def control_variate_coef(ell1, f):
    """Variance-optimal scale ``c`` for using ``c * f`` as the assistant."""
    return _cov_ratio(ell1, f)


def aggregation_coef(ell1, F, *, allow_ridge=True):
    """Coefficients of the best linear combination of several assistants.

    Returns ``(coef, ridge_fallback)``.  Solves ``Cov(F, F) c = Cov(F, ell_1)``.
    """
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 1:
        F = F.reshape(-1, 1)
    ell1 = np.asarray(ell1, dtype=np.float64).reshape(-1)
    if F.shape[1] == 0:
        raise DataError("aggregation needs at least one assistant function")
    if F.shape[0] != ell1.size or ell1.size < 2:
        raise DataError("score matrix and ell_1 values must have equal length >= 2")
    Fc = F - F.mean(axis=0)
    G = Fc.T @ Fc
    b = Fc.T @ (ell1 - ell1.mean())
    M = G.shape[0]
    scale = np.trace(G) / M
    rank = np.linalg.matrix_rank(G, tol=1e-10 * max(scale, 1e-300) * M)
    if rank == M and scale > 0:
        return np.linalg.solve(G, b), False
    if not allow_ridge or scale <= 0:
        raise NumericalFailure("assistant score covariance is singular")
    return np.linalg.solve(G + 1e-8 * scale * np.eye(M), b), True


# ------------------------------------------------------------- estimators

def cross_fit_models(ds: SemiDataset, k, spec, *, use_analytic_ell1=None, split=None):
    """``(f1, f2)`` fitted on labeled folds 1 and 2."""
    k = get_kernel(k)
    split = split or split_crossfit(ds)
    ua = default_use_analytic(k) if use_analytic_ell1 is None else use_analytic_ell1
    f1 = nested_fit_f(ds, split, 1, k, spec, ua)
    f2 = nested_fit_f(ds, split, 2, k, spec, ua)
    return f1, f2


def cross_scores(ds: SemiDataset, f1, f2, split=None):
    """Stacked ``f_cross`` scores: ``f1`` scores fold 2, ``f2`` scores fold 1."""
    split = split or split_crossfit(ds)
    g1, g2 = as_score_function(f1), as_score_function(f2)
    X = ds.all_x
    s = np.empty(ds.n + ds.m)
    fold1 = np.concatenate([split.fold1_labeled, split.fold1_unlabeled])
    fold2 = np.concatenate([split.fold2_labeled, split.fold2_unlabeled])
    s[fold1] = g2(X[fold1])
    s[fold2] = g1(X[fold2])
    return s


def _estimate(ds, k, scores, method, alpha, *, u=None, generic_ell1=False,
              with_lambda=True, max_n=None, extra=None):
    k = get_kernel(k)
    alpha = check_alpha(alpha)
    if u is None:
        u = u_statistic(k, ds.labeled_y, max_n=max_n)
    point = corrected_point(u, k.order, scores, ds.n)
    diag = {"u_statistic": u}
    if with_lambda:
        e1 = ell1_hat_labeled(ds, k, generic_ell1)
        lh = lambda_hat(ds, k, scores[:ds.n], u=u, ell1_values=e1, max_n=max_n)
        lo, hi = confidence_interval(point, lh.lambda_hat, ds.n, alpha)
        try:
            ratio = improvement_ratio(e1, scores[:ds.n])
        except NumericalFailure:
            ratio = None
        diag.update(sigma2_hat=lh.sigma2_hat, tau_hat=lh.tau_hat, clamped=lh.clamped,
                    improvement_ratio=ratio)
        lam = lh.lambda_hat
    else:
        lam, lo, hi = float("nan"), float("nan"), float("nan")
    if extra:
        diag.update(extra)
    return Estimate(float(point), float(lam), float(lo), float(hi), alpha, ds.n, ds.m, method, diag)


def u_classical(ds: SemiDataset, k, *, alpha=0.05, max_n=None, with_lambda=True):
    """The ordinary U-statistic, reported as an :class:`Estimate` (``Lambda = r^2 sigma^2``)."""
    k = get_kernel(k)
    zeros = np.zeros(ds.n + ds.m)
    sub = SemiDataset(ds.labeled_x, ds.labeled_y, None, ds.covariate_names, ds.response_names)
    est = _estimate(sub, k, zeros[:ds.n], "classical", alpha, max_n=max_n, with_lambda=with_lambda)
    est.m = ds.m
    return est


def u_cross(ds: SemiDataset, k, spec, *, alpha=0.05, use_analytic_ell1=None,
            generic_ell1=False, u=None, max_n=None, with_lambda=True) -> Estimate:
    """Cross-fit semi-supervised U-statistic with its variance estimate."""
    k = get_kernel(k)
    if ds.n < max(k.order, 4):
        raise FoldTooSmallError(f"cross-fitting needs n >= {max(k.order, 4)}, got {ds.n}")
    split = split_crossfit(ds)
    f1, f2 = cross_fit_models(ds, k, spec, use_analytic_ell1=use_analytic_ell1, split=split)
    scores = cross_scores(ds, f1, f2, split)
    return _estimate(ds, k, scores, "cross", alpha, u=u, generic_ell1=generic_ell1,
                     with_lambda=with_lambda, max_n=max_n)


def plug_model(ds: SemiDataset, k, spec, *, use_analytic_ell1=None):
    """``f_hat`` fitted once on all labeled rows."""
    k = get_kernel(k)
    ua = default_use_analytic(k) if use_analytic_ell1 is None else use_analytic_ell1
    targets = ell1_hat_labeled(ds, k, generic=not ua)
    return fit_regressor(spec, ds.labeled_x, targets)


def u_plug(ds: SemiDataset, k, spec, *, alpha=0.05, use_analytic_ell1=None,
           generic_ell1=False, u=None, max_n=None, with_lambda=True) -> Estimate:
    """Plug-in semi-supervised U-statistic (no sample splitting)."""
    k = get_kernel(k)
    if ds.n < max(k.order, 2):
        raise DataError(f"need n >= {max(k.order, 2)}, got {ds.n}")
    model = plug_model(ds, k, spec, use_analytic_ell1=use_analytic_ell1)
    return _estimate(ds, k, _score_all(ds, model), "plug", alpha, u=u,
                     generic_ell1=generic_ell1, with_lambda=with_lambda, max_n=max_n)


def u_single(ds: SemiDataset, k, model, *, alpha=0.05, generic_ell1=False, u=None,
             max_n=None, with_lambda=True) -> Estimate:
    """Plug-in display with an externally trained, fixed assistant ``model``.

    The caller guarantees that ``model`` was trained on data disjoint from ``ds``.
    """
    k = get_kernel(k)
    if ds.n < k.order:
        raise DataError(f"need n >= r = {k.order}, got n={ds.n}")
    return _estimate(ds, k, _score_all(ds, model), "single", alpha, u=u,
                     generic_ell1=generic_ell1, with_lambda=with_lambda, max_n=max_n)


# --------------------------------------------------- estimator-style facade

METHODS = ("classical", "oracle", "cross", "plug", "single")


class SemiSupervisedUStatistic(BaseEstimator):
    """Scikit-learn style wrapper around the estimators in this module.

    ``fit(X, y, X_unlabeled)`` computes the estimate; results are exposed as
    ``estimate_``, ``point_``, ``lambda_hat_`` and ``ci_``.
    """

    def __init__(self, kernel="variance", method="cross", regressor="knn:k=10",
                 alpha=0.05, use_analytic_ell1=None, assistant=None):
        self.kernel = kernel
        self.method = method
        self.regressor = regressor
        self.alpha = alpha
        self.use_analytic_ell1 = use_analytic_ell1
        self.assistant = assistant

    def fit(self, X, y, X_unlabeled=None):
        ds = SemiDataset(X, y, X_unlabeled)
        k = get_kernel(self.kernel)
        if self.method == "classical":
            est = u_classical(ds, k, alpha=self.alpha)
        elif self.method == "cross":
            est = u_cross(ds, k, parse_regressor(self.regressor), alpha=self.alpha,
                          use_analytic_ell1=self.use_analytic_ell1)
        elif self.method == "plug":
            est = u_plug(ds, k, parse_regressor(self.regressor), alpha=self.alpha,
                         use_analytic_ell1=self.use_analytic_ell1)
        elif self.method in ("single", "oracle"):
            if self.assistant is None:
                raise DataError(f"method {self.method!r} needs an assistant function")
            est = u_single(ds, k, self.assistant, alpha=self.alpha)
            est.method = self.method
        else:
            raise DataError(f"unknown method {self.method!r}; choose from {METHODS}")
        self.estimate_ = est
        self.point_ = est.point
        self.lambda_hat_ = est.lambda_hat
        self.ci_ = (est.ci_low, est.ci_high)
        return self
