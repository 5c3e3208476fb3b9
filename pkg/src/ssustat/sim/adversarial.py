"""Slow normal approximation of the cross-fit estimator under unstable assistants.

With ``Y = X ~ N(0, 1)``, the mean kernel and fold ``a`` of size ``h_a``,
the assistants

    f_1(x) = e (x + h_1^{-1/2} sum_{fold 1} X_i),   f_2 likewise on fold 2,
    e = sqrt(eps) / 2,

have mean squared prediction error ``eps`` in total against the target
``f = 0``.  Their fold-level constants cancel from the cross-fit display
(exactly for even ``n`` and ``m``), leaving

    sqrt(n) U_cross ~ N(0, s^2),
    s^2 = (1 - e/(1 + lam))^2 + e^2 lam / (1 + lam)^2,   lam = n/m,

so the Kolmogorov distance to ``N(0, 1)`` is ``sup_t |Phi(t/s) - Phi(t)|``,
which does not shrink with ``n`` for fixed ``eps``.
"""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.stats import norm

from .. import __version__
from ..estimators import corrected_point, cross_scores
from ..data import split_crossfit
from ..exceptions import ConfigError
from .engine import SimConfig, SimReport, map_rep_blocks
from .kolmogorov import empirical_kolmogorov, gap_at
from .models import make_model


def sd_ratio(eps, n, m) -> float:
    """Standard deviation ``s`` of ``sqrt(n) U_cross`` under the construction."""
    if m < 1:
        raise ConfigError("need m >= 1")
    e = math.sqrt(eps) / 2
    lam = n / m
    return math.sqrt((1 - e / (1 + lam)) ** 2 + e * e * lam / (1 + lam) ** 2)


def predicted_gap(eps, n, m, t=1.0) -> float:
    """``P(sqrt(n) U_cross <= t) - Phi(t)``."""
    s = sd_ratio(eps, n, m)
    return float(norm.cdf(t / s) - norm.cdf(t))


def predicted_distance(eps, n, m) -> float:
    """``sup_t |Phi(t/s) - Phi(t)|``, attained at ``t^2 = 2 s^2 log(s) / (s^2 - 1)``."""
    s = sd_ratio(eps, n, m)
    if abs(s - 1) < 1e-12:
        return 0.0
    t = math.sqrt(2 * s * s * math.log(s) / (s * s - 1))
    return float(abs(norm.cdf(t / s) - norm.cdf(t)))


def adversarial_assistants(labeled_x, split, eps):
    """The closed-form ``(f_1, f_2)``; each depends on its whole labeled fold."""
    e = math.sqrt(eps) / 2
    x = np.asarray(labeled_x, dtype=np.float64)[:, 0]

    def make(fold):
        idx = split.labeled(fold)
        shift = x[idx].sum() / math.sqrt(idx.size)
        return lambda X: e * (np.asarray(X, dtype=np.float64)[:, 0] + shift)

    return make(1), make(2)


def _block(payload, reps):
    n, m, eps_grid, seed = payload["n"], payload["m"], payload["eps"], payload["base_seed"]
    model = make_model("be_adversarial")
    split = split_crossfit(n, m)
    out = np.empty((len(reps), len(eps_grid)))
    for r_i, rep in enumerate(reps):
        ds = model.generate_rep(n, m, seed, rep)
        u = float(np.mean(ds.labeled_y))
        for e_i, eps in enumerate(eps_grid):
            f1, f2 = adversarial_assistants(ds.labeled_x, split, eps)
            point = corrected_point(u, 1, cross_scores(ds, f1, f2, split), n)
            out[r_i, e_i] = math.sqrt(n) * point  # psi = 0, Lambda = Var Y = 1
    return out


def run_be_adversarial(cfg: SimConfig, *, t=1.0, progress=None, return_values=False):
    """Kolmogorov distance and the gap at ``t`` for each ``eps`` in the sweep.

    ``cfg.sweep_param`` must be ``'eps'`` (or absent, using ``model_params['eps']``).
    """
    if cfg.kind != "adversarial":
        raise ConfigError(f"config kind is {cfg.kind!r}, expected 'adversarial'")
    cfg.validate()
    if cfg.sweep_param not in (None, "eps"):
        raise ConfigError("adversarial runs sweep over 'eps' only")
    if cfg.base_seed is None:
        raise ConfigError("a base_seed is required for simulations")
    eps_grid = [float(p["params"].get("eps", 0.0)) for p in cfg.points()]
    t0 = time.perf_counter()
    payload = {"n": cfg.n, "m": cfg.m, "eps": eps_grid, "base_seed": cfg.base_seed}
    values = map_rep_blocks(_block, payload, cfg.reps, cfg.jobs, progress)
    rows = []
    for e_i, (eps, p) in enumerate(zip(eps_grid, cfg.points())):
        z = values[:, e_i]
        rows.append({
            "estimator": "cross", "param": p["label"], "n": cfg.n, "m": cfg.m, "psi": 0.0,
            "reps": int(z.size), "eps": eps,
            "mean": float(np.mean(z)), "variance": float(np.var(z)),
            "sd_ratio": sd_ratio(eps, cfg.n, cfg.m),
            "kolmogorov": empirical_kolmogorov(z),
            "predicted_kolmogorov": predicted_distance(eps, cfg.n, cfg.m),
            "t": float(t), "gap_t": gap_at(z, t),
            "predicted_gap_t": predicted_gap(eps, cfg.n, cfg.m, t),
        })
    report = SimReport(cfg.to_dict(), rows, version=__version__,
                       wall_time=time.perf_counter() - t0)
    return (report, values) if return_values else report


def fit_sqrt_constant(eps_grid, distances) -> float:
    """Largest ``c`` with ``distance >= c sqrt(eps)`` over the positive grid points."""
    pairs = [(e, d) for e, d in zip(eps_grid, distances) if e > 0]
    if not pairs:
        raise ConfigError("need at least one positive eps")
    return float(min(d / math.sqrt(e) for e, d in pairs))
