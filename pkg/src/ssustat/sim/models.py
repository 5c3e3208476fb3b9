"""Data-generating models with documented oracle moments.

Every model draws labeled covariates, labeled noise and unlabeled covariates
from three separate streams, each row by row, so that smaller ``n`` or ``m``
always give prefixes of larger draws.
"""

from __future__ import annotations

import difflib
import math
from typing import Optional

import numpy as np
from scipy.stats import norm

from ..data import SemiDataset
from ..exceptions import ConfigError, UnknownNameError
from .rng import standard_normal, stream


def equicorrelated(rng, rows, d, rho):
    """``N(0, (1 - rho) I + rho 11^T)`` via ``sqrt(rho) Z0 1 + sqrt(1 - rho) Z``.

    Needs ``0 <= rho < 1``; negative ``rho`` uses a Cholesky factor instead.
    """
    Z = standard_normal(rng, (rows, d + 1))
    if rho >= 0:
        return math.sqrt(rho) * Z[:, :1] + math.sqrt(1 - rho) * Z[:, 1:]
    S = (1 - rho) * np.eye(d) + rho * np.ones((d, d))
    return Z[:, 1:] @ np.linalg.cholesky(S).T


class Model:
    """Base class; subclasses define ``_covariates`` and ``_responses``."""

    name = "model"
    d = 1
    q = 1
    kernel = "mean"
    noise_cols = 1

    def __init__(self, **params):
        self.params = dict(params)

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.name}({args})"

    def _covariates(self, rng, rows):
        return standard_normal(rng, (rows, self.d))

    def _responses(self, X, noise):
        raise NotImplementedError

    def generate(self, n, m, rng, *, rng_noise=None, rng_unlabeled=None) -> SemiDataset:
        """Draw a dataset; with one generator all parts are drawn from it in turn."""
        if n < 1 or m < 0:
            raise ConfigError(f"need n >= 1 and m >= 0, got n={n}, m={m}")
        rn = rng if rng_noise is None else rng_noise
        ru = rng if rng_unlabeled is None else rng_unlabeled
        X = self._covariates(rng, n)
        noise = standard_normal(rn, (n, self.noise_cols))
        Y = self._responses(X, noise)
        U = self._covariates(ru, m) if m else np.empty((0, self.d))
        return SemiDataset(X, Y, U)

    def generate_rep(self, n, m, base_seed, rep) -> SemiDataset:
        """Dataset for repetition ``rep`` drawn from the keyed role streams."""
        return self.generate(
            n, m, stream(base_seed, rep, "labeled"),
            rng_noise=stream(base_seed, rep, "noise"),
            rng_unlabeled=stream(base_seed, rep, "unlabeled"),
        )

    # oracle quantities -------------------------------------------------
    def cond_mean(self, X) -> Optional[np.ndarray]:
        return None

    def psi1(self, X) -> Optional[np.ndarray]:
        """Optimal assistant ``E[ell_1(Y) | X]`` for the paired kernel."""
        return None

    @property
    def psi(self) -> float:
        raise NotImplementedError

    def oracle_moments(self) -> dict:
        return {"psi": self.psi}


class VarModel1(Model):
    """``X ~ N(0, I_10)``, ``Y = X1 + ... + X5 + 0.3 e``; target ``Var Y``.

    ``Var Y = 5.09``, ``E Var(Y|X) = 0.09``, ``Var E(Y|X) = 5``;
    ``ell_1(y) = (y^2 + 5.09)/2`` so ``Var ell_1 = 5.09^2 / 2``;
    ``psi_1(x) = (s^2 + 5.18)/2`` with ``s = x1 + ... + x5`` and
    ``Var psi_1 = 12.5``.
    """

    name, d, kernel = "var_model1", 10, "variance"

    def _responses(self, X, noise):
        return X[:, :5].sum(axis=1) + 0.3 * noise[:, 0]

    def cond_mean(self, X):
        return np.asarray(X)[:, :5].sum(axis=1)

    def psi1(self, X):
        s = np.asarray(X)[:, :5].sum(axis=1)
        return 0.5 * (s * s + 0.09 + 5.09)

    @property
    def psi(self):
        return 5.09

    def oracle_moments(self):
        var_ell1 = 5.09**2 / 2
        return {"psi": 5.09, "e_cond_var": 0.09, "var_cond_mean": 5.0,
                "var_ell1": var_ell1, "sigma2_sq": 12.5, "sigma1_sq": var_ell1 - 12.5}


class VarModel2(Model):
    """``Y = delta sqrt(X1^2 + X2^2 + 0.09 e^2)``, ``delta = +-1``; target ``Var Y``.

    ``E(Y|X) = 0``, ``Var Y = 2.09``; ``ell_1(y) = (y^2 + 2.09)/2``,
    ``Var ell_1 = (4 + 2 * 0.0081)/4``, ``Var psi_1 = 1``.
    """

    name, d, kernel, noise_cols = "var_model2", 10, "variance", 2

    def _responses(self, X, noise):
        delta = np.where(noise[:, 1] > 0, 1.0, -1.0)
        return delta * np.sqrt(X[:, 0] ** 2 + X[:, 1] ** 2 + 0.09 * noise[:, 0] ** 2)

    def cond_mean(self, X):
        return np.zeros(np.shape(X)[0])

    def psi1(self, X):
        X = np.asarray(X)
        return 0.5 * (X[:, 0] ** 2 + X[:, 1] ** 2 + 0.09 + 2.09)

    @property
    def psi(self):
        return 2.09

    def oracle_moments(self):
        var_ell1 = (4 + 2 * 0.0081) / 4
        return {"psi": 2.09, "e_cond_var": 2.09, "var_cond_mean": 0.0,
                "var_ell1": var_ell1, "sigma2_sq": 1.0, "sigma1_sq": var_ell1 - 1.0}


class _EquicorrModel(Model):
    d, rho = 4, 0.7

    def _covariates(self, rng, rows):
        return equicorrelated(rng, rows, self.d, self.rho)


class Mu2Model1(_EquicorrModel):
    """``X ~ N(0, 0.3 I + 0.7 11^T)`` in 4-d, ``Y = mu + X1 + X2 + 0.3 e``; target ``mu^2``.

    ``Var E(Y|X) = 3.4``, ``E Var(Y|X) = 0.09``.
    """

    name, kernel = "mu2_model1", "product"

    def __init__(self, mu=0.0):
        super().__init__(mu=float(mu))
        self.mu = float(mu)

    def _responses(self, X, noise):
        return self.mu + X[:, 0] + X[:, 1] + 0.3 * noise[:, 0]

    def cond_mean(self, X):
        X = np.asarray(X)
        return self.mu + X[:, 0] + X[:, 1]

    def psi1(self, X):
        return self.mu * self.cond_mean(X)

    @property
    def psi(self):
        return self.mu**2

    def oracle_moments(self):
        return {"psi": self.psi, "mean": self.mu, "e_cond_var": 0.09, "var_cond_mean": 3.4}


def _sin_moments(a, b, rho):
    """Variances and covariance of ``sin(a X1)``, ``sin(b X2)`` for standard X with corr rho."""
    va = 0.5 * (1 - math.exp(-2 * a * a))
    vb = 0.5 * (1 - math.exp(-2 * b * b))
    cov = 0.5 * (math.exp(-(a * a + b * b - 2 * a * b * rho) / 2)
                 - math.exp(-(a * a + b * b + 2 * a * b * rho) / 2))
    return va, vb, cov


class Mu2Model2(_EquicorrModel):
    """As :class:`Mu2Model1` with ``Y = mu + sin(5 X1) + sin(3 X2) + 0.3 e``.

    ``E sin(aX) = 0``, ``Var sin(aX) = (1 - exp(-2a^2))/2`` and
    ``Cov(sin aX1, sin bX2) = (exp(-(a^2+b^2-2ab rho)/2) - exp(-(a^2+b^2+2ab rho)/2))/2``.
    """

    name, kernel = "mu2_model2", "product"

    def __init__(self, mu=0.0):
        super().__init__(mu=float(mu))
        self.mu = float(mu)

    def _responses(self, X, noise):
        return self.mu + np.sin(5 * X[:, 0]) + np.sin(3 * X[:, 1]) + 0.3 * noise[:, 0]

    def cond_mean(self, X):
        X = np.asarray(X)
        return self.mu + np.sin(5 * X[:, 0]) + np.sin(3 * X[:, 1])

    def psi1(self, X):
        return self.mu * self.cond_mean(X)

    @property
    def psi(self):
        return self.mu**2

    def oracle_moments(self):
        va, vb, cov = _sin_moments(5, 3, self.rho)
        return {"psi": self.psi, "mean": self.mu, "e_cond_var": 0.09,
                "var_cond_mean": va + vb + 2 * cov}


class KendallModel(Model):
    """``X ~ N(0, (1-rho) I + rho 11^T)`` in 2-d; ``V = X1 + 0.05 e1``, ``W = X2 + 0.05 e2``.

    ``corr(V, W) = rho/1.0025`` and ``tau = (2/pi) arcsin(rho/1.0025)``.
    """

    name, d, q, kernel, noise_cols = "kendall_model", 2, 2, "kendall", 2

    def __init__(self, rho=0.0):
        if not -1 < float(rho) < 1:
            raise ConfigError(f"rho must lie in (-1, 1), got {rho}")
        super().__init__(rho=float(rho))
        self.rho = float(rho)

    def _covariates(self, rng, rows):
        return equicorrelated(rng, rows, 2, self.rho)

    def _responses(self, X, noise):
        return X + 0.05 * noise

    @property
    def psi(self):
        return 2 / math.pi * math.asin(self.rho / 1.0025)

    def oracle_moments(self):
        return {"psi": self.psi, "e_cond_var": 0.0025, "var_cond_mean": 1.0}


class WilcoxonModel(_EquicorrModel):
    """``Y = mu + X1 + X2 + 0.05 e`` with the 4-d equicorrelated design.

    ``Var Y = 3.4025``; ``P(Y1 + Y2 > 0) = Phi(sqrt(2) mu / sqrt(3.4025))``.
    """

    name, kernel = "wilcoxon_model", "wilcoxon"

    def __init__(self, mu=0.0):
        super().__init__(mu=float(mu))
        self.mu = float(mu)

    def _responses(self, X, noise):
        return self.mu + X[:, 0] + X[:, 1] + 0.05 * noise[:, 0]

    def cond_mean(self, X):
        X = np.asarray(X)
        return self.mu + X[:, 0] + X[:, 1]

    @property
    def psi(self):
        return float(norm.cdf(math.sqrt(2) * self.mu / math.sqrt(3.4025)))

    def oracle_moments(self):
        return {"psi": self.psi, "e_cond_var": 0.0025, "var_cond_mean": 3.4}


class LinearGauss(Model):
    """``Y = mu + X + e`` with ``X ~ N(0, var_x)``, ``e ~ N(0, var_eps)``; target ``mu^2``."""

    name, kernel = "linear_gauss", "product"

    def __init__(self, mu=0.0, var_x=1.0, var_eps=1.0):
        super().__init__(mu=float(mu), var_x=float(var_x), var_eps=float(var_eps))
        self.mu, self.var_x, self.var_eps = float(mu), float(var_x), float(var_eps)
        if self.var_x < 0 or self.var_eps < 0:
            raise ConfigError("variances must be >= 0")

    def _covariates(self, rng, rows):
        return math.sqrt(self.var_x) * standard_normal(rng, (rows, 1))

    def _responses(self, X, noise):
        return self.mu + X[:, 0] + math.sqrt(self.var_eps) * noise[:, 0]

    def cond_mean(self, X):
        return self.mu + np.asarray(X)[:, 0]

    def psi1(self, X):
        return self.mu * self.cond_mean(X)

    @property
    def psi(self):
        return self.mu**2

    def oracle_moments(self):
        return {"psi": self.psi, "mean": self.mu, "e_cond_var": self.var_eps,
                "var_cond_mean": self.var_x}


class BEAdversarial(Model):
    """``Y = X ~ N(0, 1)``; mean kernel, ``psi = 0``, ``Lambda = Var Y = 1``.

    ``eps`` is the mean squared prediction error of the closed-form assistants
    used by :func:`ssustat.sim.adversarial.run_be_adversarial`.
    """

    name, kernel = "be_adversarial", "mean"

    def __init__(self, eps=0.0):
        if not float(eps) >= 0:
            raise ConfigError(f"eps must be >= 0, got {eps}")
        super().__init__(eps=float(eps))
        self.eps = float(eps)

    def _responses(self, X, noise):
        return X[:, 0].copy()

    def cond_mean(self, X):
        return np.asarray(X)[:, 0]

    def psi1(self, X):
        return np.asarray(X)[:, 0]

    @property
    def psi(self):
        return 0.0

    def oracle_moments(self):
        return {"psi": 0.0, "e_cond_var": 0.0, "var_cond_mean": 1.0, "var_ell1": 1.0}


MODELS = {cls.name: cls for cls in (VarModel1, VarModel2, Mu2Model1, Mu2Model2,
                                    KendallModel, WilcoxonModel, LinearGauss, BEAdversarial)}


def model_names():
    return sorted(MODELS)


def make_model(name, **params) -> Model:
    if isinstance(name, Model):
        return name
    try:
        cls = MODELS[name]
    except KeyError:
        raise UnknownNameError("model", name,
                               difflib.get_close_matches(str(name), list(MODELS)) or model_names()) from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for model {name!r}: {exc}") from None


def generate(model, n, m, rng) -> SemiDataset:
    """Draw ``n`` labeled and ``m`` unlabeled rows from ``model`` using ``rng``."""
    return make_model(model).generate(n, m, rng)
