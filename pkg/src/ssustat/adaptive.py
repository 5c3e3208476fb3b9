"""Degeneracy-adaptive semi-supervised U-statistics for order-2 kernels.

With ``N = n + m`` stacked rows (labeled first) and ``delta_i = 1`` for
labeled rows, the estimator is

    N/(N-1) * sum_{i != j} [ d_i d_j/n^2 (ell(Y_i,Y_j) + l2(i,j) - 2 l1(i,j))
                             + l2(i,j)/N^2 + 2 d_i/(nN) (l1(i,j) - l2(i,j)) ]

over ordered pairs, where ``l1(i, j)`` approximates ``E[ell(Y_i, Y') | X' = X_j]``
and ``l2(i, j)`` approximates ``E[ell(Y', Y'') | X' = X_i, X'' = X_j]``.
With ``m = 0`` it is exactly the ordinary U-statistic.

Hooks are index based: ``l1`` for column ``j`` must use the conditional
model trained on the fold opposite to ``j``.  For separable kernels
``ell(a, b) = phi(a) phi(b)`` hooks may carry a factor matrix ``G``
(``N x B``) with ``l2(i, j) = G_i . G_j / B`` and
``l1(i, j) = phi(Y_i) mean(G_j)``, which allows an ``O(N B)`` evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_covariates, check_responses
from .data import SemiDataset, split_crossfit
from .estimators import cross_scores
from .exceptions import DataError, FoldTooSmallError, UnsupportedOperation
from .kernels import PRODUCT, get_kernel
from .regress import KNNRegressor, fit_regressor

MAX_PAIR_ROWS = 20000


@dataclass(frozen=True)
class BivariateHooks:
    """Estimated ``l1``/``l2`` bound to one dataset's stacked indices."""

    n: int
    N: int
    provenance: str
    ell1_block: Callable
    ell2_block: Callable
    factors: Optional[np.ndarray] = None
    draws: Optional[int] = None

    def ell1_xy(self, i, j):
        """``l1(Y_i, X_j)`` for labeled ``i`` and any stacked ``j``."""
        return float(self.ell1_block(np.array([i]), np.array([j]))[0, 0])

    def ell2_xx(self, i, j):
        return float(self.ell2_block(np.array([i]), np.array([j]))[0, 0])


def _pairwise(func, A, B):
    """``func(A_a, B_b)`` for all row pairs, shape ``(len(A), len(B))``."""
    a = np.repeat(A, B.shape[0], axis=0)
    b = np.tile(B, (A.shape[0], 1))
    return np.asarray(func(a, b), dtype=np.float64).reshape(A.shape[0], B.shape[0])


def hooks_from_factors(ds: SemiDataset, k, G, provenance, draws=None):
    """Hooks for a separable kernel from a per-row factor matrix ``G``."""
    k = get_kernel(k)
    if k.separable is None:
        raise UnsupportedOperation(f"kernel {k.name!r} is not separable")
    G = np.asarray(G, dtype=np.float64)
    if G.ndim == 1:
        G = G.reshape(-1, 1)
    N = ds.n + ds.m
    if G.shape[0] != N:
        raise DataError(f"factor matrix has {G.shape[0]} rows, expected {N}")
    G = G.copy()
    G.setflags(write=False)
    phi_y = np.asarray(k.separable(ds.labeled_y), dtype=np.float64)
    gbar = G.mean(axis=1)
    B = G.shape[1]

    def ell1_block(I, J):
        return np.outer(phi_y[I], gbar[J])

    def ell2_block(I, J):
        return G[I] @ G[J].T / B

    return BivariateHooks(ds.n, N, provenance, ell1_block, ell2_block, G, draws)


def hooks_from_functions(ds: SemiDataset, ell1_fn, ell2_fn, provenance="oracle"):
    """Hooks from known functions ``ell1_fn(y_rows, x_rows)`` and ``ell2_fn(xa, xb)``.

    Both take paired row arrays and return one value per pair.
    """
    Y, X = ds.labeled_y, ds.all_x

    def ell1_block(I, J):
        return _pairwise(ell1_fn, Y[I], X[J])

    def ell2_block(I, J):
        return _pairwise(ell2_fn, X[I], X[J])

    return BivariateHooks(ds.n, ds.n + ds.m, provenance, ell1_block, ell2_block)


def build_hooks_oracle(ds: SemiDataset, k, cond_mean_phi=None, *, ell1_fn=None, ell2_fn=None):
    """Oracle hooks from the true conditional law.

    For separable kernels pass ``cond_mean_phi(X) = E[phi(Y) | X]``; otherwise
    pass the exact ``ell1_fn`` and ``ell2_fn``.
    """
    k = get_kernel(k)
    if cond_mean_phi is not None:
        g = np.asarray(cond_mean_phi(ds.all_x), dtype=np.float64).reshape(-1)
        return hooks_from_factors(ds, k, g, "oracle")
    if ell1_fn is None or ell2_fn is None:
        raise DataError("oracle hooks need cond_mean_phi or both ell1_fn and ell2_fn")
    return hooks_from_functions(ds, ell1_fn, ell2_fn, "oracle")


def build_hooks_mu2(ds: SemiDataset, split=None, spec="ols", k=PRODUCT):
    """Regression hooks for a separable kernel (the squared-mean case).

    ``E[phi(Y) | X]`` is estimated on each labeled fold; row ``i`` uses the
    model from the fold opposite to ``i``.
    """
    k = get_kernel(k)
    if k.separable is None:
        raise UnsupportedOperation(f"kernel {k.name!r} is not separable")
    split = split or split_crossfit(ds)
    phi = np.asarray(k.separable(ds.labeled_y), dtype=np.float64)
    models = []
    for fold in (1, 2):
        idx = split.labeled(fold)
        if idx.size < 1:
            raise FoldTooSmallError(f"fold {fold} has no labeled rows")
        models.append(fit_regressor(spec, ds.labeled_x[idx], phi[idx]))
    g = cross_scores(ds, models[0], models[1], split)
    return hooks_from_factors(ds, k, g, "regression")


# -------------------------------------------------- conditional densities

class KNNConditionalDensity(BaseEstimator):
    """``p(y | x)`` as the empirical law of the ``k`` nearest labeled responses.

    ``bandwidth > 0`` adds Gaussian jitter, turning the atoms into a mixture.
    ``k=None`` uses ``ceil(n^(2/3))``.
    """

    def __init__(self, k=None, bandwidth=0.0):
        self.k = k
        self.bandwidth = bandwidth

    def fit(self, X, Y):
        X = check_covariates(X, "X")
        Y = check_responses(Y, "Y")
        if Y.shape[0] != X.shape[0]:
            raise DataError("X and Y row counts differ")
        k = math.ceil(X.shape[0] ** (2 / 3)) if self.k is None else int(self.k)
        k = min(k, X.shape[0])
        if self.bandwidth < 0:
            raise DataError("bandwidth must be >= 0")
        self.k_ = k
        self.Y_ = Y.copy()
        self.nn_ = KNNRegressor(k=k).fit(X, np.zeros(X.shape[0]))
        return self

    def atoms(self, X):
        """Neighbour responses, shape ``(rows, k, q)``."""
        return self.Y_[self.nn_.neighbors(X)]

    def sample(self, x, size, rng):
        idx = self.nn_.neighbors(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
        pick = self.Y_[idx[rng.integers(0, idx.size, size=size)]]
        if self.bandwidth > 0:
            pick = pick + self.bandwidth * rng.standard_normal(pick.shape)
        return pick

    def conditional(self, x):
        a = self.atoms(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
        if self.bandwidth > 0:
            return GaussianMixture1D(a[:, 0], self.bandwidth)
        vals, counts = np.unique(a[:, 0], return_counts=True)
        return Discrete(vals, counts / counts.sum())


class Discrete:
    """Finite distribution on ``atoms``; ``pdf`` is the mass function."""

    def __init__(self, atoms, probs):
        self.atoms = np.asarray(atoms, dtype=np.float64)
        self.probs = np.asarray(probs, dtype=np.float64)
        if self.atoms.shape != self.probs.shape or abs(self.probs.sum() - 1) > 1e-9:
            raise DataError("atoms and probabilities must match and sum to 1")

    def sample(self, size, rng):
        return rng.choice(self.atoms, size=size, p=self.probs)

    def pdf(self, y):
        y = np.asarray(y, dtype=np.float64)
        out = np.zeros(y.shape)
        for a, p in zip(self.atoms, self.probs):
            out = out + p * (y == a)
        return out


class GaussianMixture1D:
    def __init__(self, centers, bandwidth):
        self.centers = np.asarray(centers, dtype=np.float64).reshape(-1)
        self.bandwidth = float(bandwidth)

    def sample(self, size, rng):
        c = self.centers[rng.integers(0, self.centers.size, size=size)]
        return c + self.bandwidth * rng.standard_normal(size)

    def pdf(self, y):
        from scipy.stats import norm

        y = np.asarray(y, dtype=np.float64)
        return norm.pdf(y[..., None], self.centers, self.bandwidth).mean(axis=-1)


def chi2_divergence_mc(p_true, p_hat, x=None, draws=1000, seed=0):
    """Monte Carlo ``E_p[(1 - p_hat/p)^2] = int (p - p_hat)^2 / p``.

    ``p_true`` and ``p_hat`` expose ``sample(size, rng)``/``pdf(y)``; when ``x``
    is given, ``p_hat`` is a conditional model and ``p_hat.conditional(x)`` is used.
    """
    if draws < 1:
        raise DataError("draws must be >= 1")
    q = p_hat.conditional(x) if x is not None else p_hat
    rng = np.random.default_rng(seed)
    y = np.asarray(p_true.sample(draws, rng), dtype=np.float64).reshape(-1)
    p = np.asarray(p_true.pdf(y), dtype=np.float64)
    if np.any(p <= 0):
        raise DataError("true density is not positive at a sampled point")
    ratio = np.asarray(q.pdf(y), dtype=np.float64) / p
    return float(np.mean((1.0 - ratio) ** 2))


def _point_rng(seed, j):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(int(j),))))


def build_hooks_density(ds: SemiDataset, k, split=None, *, knn_k=None, bandwidth=0.0,
                        B=200, seed=None):
    """Hooks from k-NN conditional densities fitted on each labeled fold.

    Every stacked row ``j`` gets ``B`` cached draws from the density trained on
    the fold opposite to ``j``; the draw stream of row ``j`` depends only on
    ``(seed, j)``.  ``B=None`` integrates exactly over the neighbour atoms
    (requires ``bandwidth == 0``).
    """
    k = get_kernel(k)
    if k.order != 2:
        raise UnsupportedOperation("adaptive hooks need an order-2 kernel")
    if B is not None and B < 1:
        raise DataError("B must be >= 1")
    if B is None and bandwidth > 0:
        raise DataError("exact integration needs bandwidth == 0")
    if B is not None and seed is None:
        raise DataError("Monte Carlo density hooks need an explicit seed")
    split = split or split_crossfit(ds)
    models = []
    for fold in (1, 2):
        idx = split.labeled(fold)
        if idx.size < 1:
            raise FoldTooSmallError(f"fold {fold} has no labeled rows")
        models.append(KNNConditionalDensity(k=knn_k, bandwidth=bandwidth)
                      .fit(ds.labeled_x[idx], ds.labeled_y[idx]))
    N, q = ds.n + ds.m, ds.q
    X = ds.all_x
    owner = split.fold_of()  # row j uses the model from the opposite fold
    if B is None:
        kk = min(m.k_ for m in models)
        D = np.empty((N, kk, q))
        for fold, model in ((1, models[1]), (2, models[0])):
            rows = np.flatnonzero(owner == fold)
            if rows.size:
                D[rows] = model.atoms(X[rows])[:, :kk]
    else:
        D = np.empty((N, B, q))
        for j in range(N):
            model = models[1] if owner[j] == 1 else models[0]
            D[j] = model.sample(X[j], B, _point_rng(seed, j))
    D.setflags(write=False)
    provenance = "density_exact" if B is None else "density_mc"
    if k.separable is not None:
        G = np.stack([k.separable(D[j]) for j in range(N)])
        if B is None:
            G = G.mean(axis=1, keepdims=True)
        return hooks_from_factors(ds, k, G, provenance, draws=B)
    Y = ds.labeled_y
    S = D.shape[1]

    def ell1_block(I, J):
        out = np.zeros((I.size, J.size))
        for s in range(S):
            out += _pairwise(k.func, Y[I], D[J, s])
        return out / S

    def ell2_block(I, J):
        out = np.zeros((I.size, J.size))
        if B is None:
            for s in range(S):
                for t in range(S):
                    out += _pairwise(k.func, D[I, s], D[J, t])
            return out / (S * S)
        for s in range(S):
            out += _pairwise(k.func, D[I, s], D[J, s])
        return out / S

    return BivariateHooks(ds.n, N, provenance, ell1_block, ell2_block, None, B)


# ------------------------------------------------------------- evaluation

def _check(ds, k, hooks):
    k = get_kernel(k)
    if k.order != 2:
        raise UnsupportedOperation(f"adaptive estimator needs r = 2, kernel has r = {k.order}")
    if ds.n < 2:
        raise DataError("adaptive estimator needs n >= 2")
    if hooks.n != ds.n or hooks.N != ds.n + ds.m:
        raise DataError("hooks were built for a different dataset")
    return k


def _separable_sum(ds, k, G):
    n, N = ds.n, ds.n + ds.m
    phi = np.asarray(k.separable(ds.labeled_y), dtype=np.float64)
    u = np.full(N, -1.0 / N)
    u[:n] += 1.0 / n
    B = G.shape[1]
    gbar = G.mean(axis=1)
    t1 = (math.fsum(phi) ** 2 - math.fsum(phi * phi)) / n**2
    uG = u @ G
    t2 = (math.fsum(uG * uG) - math.fsum(((u * u)[:, None] * G * G).ravel())) / B
    ug = u * gbar
    t3 = -2.0 / n * (math.fsum(phi) * math.fsum(ug) - math.fsum(phi * ug[:n]))
    return t1 + t2 + t3


def _generic_sum(ds, k, hooks, chunk):
    n, N = ds.n, ds.n + ds.m
    Y = ds.labeled_y
    J = np.arange(N)
    lab = J < n
    parts = []
    for s in range(0, N, chunk):
        I = np.arange(s, min(N, s + chunk))
        di = (I < n).astype(np.float64)[:, None]
        dj = lab.astype(np.float64)[None, :]
        E2 = hooks.ell2_block(I, J)
        c2 = di * dj / n**2 + 1.0 / N**2 - 2.0 * di / (n * N)
        T = c2 * E2
        Il = I[I < n]
        if Il.size:
            r = slice(0, Il.size)  # labeled rows come first within a chunk
            E1 = hooks.ell1_block(Il, J)
            T[r] += (2.0 / (n * N) - 2.0 * dj / n**2) * E1
            T[r, :n] += _pairwise(k.func, Y[Il], Y) / n**2
        T[np.arange(I.size), I] = 0.0
        parts.append(math.fsum(T.sum(axis=1)))
    return math.fsum(parts)


def u_adapt(ds: SemiDataset, k, hooks: BivariateHooks, *, method="auto", chunk=512,
            max_rows=MAX_PAIR_ROWS) -> float:
    """Evaluate the adaptive estimator with the given hooks.

    ``method='separable'`` uses the ``O(N B)`` factor algebra, ``'generic'``
    the chunked ``O(N^2)`` pair loop (capped at ``max_rows`` stacked rows).
    """
    k = _check(ds, k, hooks)
    N = ds.n + ds.m
    use_fast = method == "separable" or (
        method == "auto" and hooks.factors is not None and k.separable is not None
    )
    if use_fast:
        if hooks.factors is None or k.separable is None:
            raise UnsupportedOperation("separable evaluation needs factor hooks and a separable kernel")
        total = _separable_sum(ds, k, hooks.factors)
    elif method in ("auto", "generic"):
        if max_rows is not None and N > max_rows:
            raise DataError(f"n+m={N} exceeds the pair-loop cap {max_rows}; pass max_rows to override")
        total = _generic_sum(ds, k, hooks, chunk)
    else:
        raise DataError(f"unknown method {method!r}")
    return N / (N - 1) * total


def u_adapt_oracle(ds: SemiDataset, k, hooks: BivariateHooks, **kwargs) -> float:
    """The oracle estimator: :func:`u_adapt` with hooks built from the true law."""
    return u_adapt(ds, k, hooks, **kwargs)


# ------------------------------------------------------------ variance

@dataclass(frozen=True)
class AdaptMoments:
    var_ell: float
    var_ell1_yx: float
    var_ell2_xx: float
    var_E_ell_given_Y1: float
    var_E_ell_given_X1: float


def oracle_variance_adapt(n, m, moments) -> float:
    """``4 H/n + 2 G/n^2`` with

    ``H = Var E(ell|Y1) - w Var E(ell|X1)`` and
    ``G = Var ell - 2 w Var l1(Y1, X2) + w^2 Var l2(X1, X2)``, ``w = m/(n+m)``.
    """
    if isinstance(moments, dict):
        moments = AdaptMoments(**moments)
    w = m / (n + m)
    H = moments.var_E_ell_given_Y1 - w * moments.var_E_ell_given_X1
    G = moments.var_ell - 2 * w * moments.var_ell1_yx + w * w * moments.var_ell2_xx
    return 4 * H / n + 2 * G / n**2


def product_moments_additive(mu, var_signal, var_noise) -> AdaptMoments:
    """Exact moments of ``ell = Y1 Y2`` when ``Y = mu + S + e``, ``E(Y|X) = mu + S``."""
    s2 = var_signal + var_noise
    ey2 = mu * mu + s2
    eg2 = mu * mu + var_signal
    mu4 = mu**4
    return AdaptMoments(
        var_ell=ey2 * ey2 - mu4,
        var_ell1_yx=ey2 * eg2 - mu4,
        var_ell2_xx=eg2 * eg2 - mu4,
        var_E_ell_given_Y1=mu * mu * s2,
        var_E_ell_given_X1=mu * mu * var_signal,
    )


def sigma2_mn(n, m, var_signal, var_noise):
    """``Var(e) + n/(n+m) Var(S)``."""
    return var_noise + n / (n + m) * var_signal


def mu2_mse_approx(n, m, mu, var_signal, var_noise):
    """Leading-order MSE ``4 mu^2 s/n + 2 s^2/n^2`` with ``s = sigma2_mn``."""
    s = sigma2_mn(n, m, var_signal, var_noise)
    return 4 * mu * mu * s / n + 2 * s * s / n**2
