"""Seeded Monte Carlo engine for estimator MSE and test size/power.

Each repetition draws one dataset per sweep point from streams keyed by
``(base_seed, rep, role)``; repetitions run in blocks on a process pool and
are reduced in index order, so reports do not depend on ``jobs``.

Sweeps over ``m`` reuse one maximal draw per repetition: assistant models
depend only on labeled rows, so they are fitted once and their predictions
on the unlabeled rows are sliced per ``m``.
"""

from __future__ import annotations

import csv
import dataclasses
import difflib
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import clone

from .. import __version__
from ..adaptive import build_hooks_density, hooks_from_factors, u_adapt
from ..data import SemiDataset, split_crossfit
from ..estimators import (corrected_point, ell1_hat_labeled, lambda_from_parts, plug_model)
from ..exceptions import ConfigError, SSUError, SimulationError, UnknownNameError
from ..kernels import get_kernel
from ..infer_tests import kendall_classical, ss_test_from_scores, wilcoxon_classical
from ..regress import (KNNRegressor, default_use_analytic, fit_regressor, nested_targets,
                       parse_regressor)
from ..ustat import jackknife_sigma2, u_statistic
from .kolmogorov import empirical_kolmogorov
from .models import Model, make_model
from .rng import seed_for, stream

SCHEMA_VERSION = 1
DEFAULT_REPS = 2000
KINDS = ("mse", "test", "adversarial")
MSE_ESTIMATORS = ("classical", "oracle", "cross@<regressor>", "plug@<regressor>",
                  "single@<regressor>", "adapt@<regressor>", "adapt@density[:k=..,B=..]",
                  "adapt-oracle")
TEST_ESTIMATORS = ("<family>-classical", "<family>-ss@<regressor>", "<family>-plug@<regressor>")


# ------------------------------------------------------------------ config

@dataclass
class SimConfig:
    """One experiment.  ``sweep_param`` is ``'n'``, ``'m'`` or a model parameter."""

    model: str
    n: int
    m: int
    estimators: list
    reps: int = DEFAULT_REPS
    base_seed: Optional[int] = None
    experiment: str = "experiment"
    model_params: dict = field(default_factory=dict)
    kernel: Optional[str] = None
    kind: str = "mse"
    alpha: float = 0.05
    jobs: int = 1
    sweep_param: Optional[str] = None
    sweep_values: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, data) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            hints = difflib.get_close_matches(unknown[0], names)
            raise ConfigError(f"unknown config keys {unknown}" + (f"; did you mean {hints}?" if hints else ""))
        missing = [k for k in ("model", "n", "m", "estimators") if k not in data]
        if missing:
            raise ConfigError(f"missing config keys {missing}")
        cfg = cls(**{k: v for k, v in data.items()})
        cfg.validate()
        return cfg

    def to_dict(self):
        out = dataclasses.asdict(self)
        return {k: v for k, v in out.items() if v is not None}

    def validate(self):
        def integer(name, lo):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}, got {v!r}")
            setattr(self, name, int(v))

        integer("n", 1)
        integer("m", 0)
        integer("reps", 1)
        integer("jobs", 1)
        if self.base_seed is not None:
            integer("base_seed", 0)
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0 < float(self.alpha) < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        self.alpha = float(self.alpha)
        if isinstance(self.estimators, str):
            self.estimators = [self.estimators]
        if not self.estimators:
            raise ConfigError("estimator list is empty")
        self.estimators = [str(e) for e in self.estimators]
        if self.kind == "mse" and "classical" not in self.estimators:
            self.estimators = ["classical"] + self.estimators
        if len(set(self.estimators)) != len(self.estimators):
            raise ConfigError("duplicate estimators")
        self.sweep_values = list(self.sweep_values or [])
        if self.sweep_param is not None and not self.sweep_values:
            raise ConfigError("sweep_param given without sweep_values")
        if self.sweep_param is None and self.sweep_values:
            raise ConfigError("sweep_values given without sweep_param")
        if self.sweep_param in ("n", "m"):
            lo = 1 if self.sweep_param == "n" else 0
            if any(int(v) != v or v < lo for v in self.sweep_values):
                raise ConfigError(f"{self.sweep_param} values must be integers >= {lo}")
            self.sweep_values = [int(v) for v in self.sweep_values]
        for point in self.points():
            model = make_model(self.model, **point["params"])
        kernel = get_kernel(self.kernel or model.kernel)
        self.kernel = kernel.name
        if self.kind == "adversarial":
            if model.name != "be_adversarial" or self.estimators != ["cross"]:
                raise ConfigError("adversarial runs need model 'be_adversarial' and estimators ['cross']")
            if any(p["m"] < p["n"] for p in self.points()):
                raise ConfigError("the adversarial construction needs m >= n")
            return self
        for desc in self.estimators:
            _parse_estimator(desc, self.kind, kernel)
        return self

    def points(self):
        """Sweep points as dicts with ``n``, ``m``, model ``params`` and a label."""
        if self.sweep_param is None:
            return [{"n": self.n, "m": self.m, "params": dict(self.model_params), "label": ""}]
        out = []
        for v in self.sweep_values:
            p = {"n": self.n, "m": self.m, "params": dict(self.model_params)}
            if self.sweep_param in ("n", "m"):
                p[self.sweep_param] = int(v)
            else:
                p["params"][self.sweep_param] = v
            p["label"] = f"{self.sweep_param}={v}"
            out.append(p)
        return out


# ------------------------------------------------------------- estimators

@dataclass(frozen=True)
class _Desc:
    name: str
    kind: str
    spec: object = None
    options: tuple = ()


def _parse_kv(text):
    opts = {}
    for part in filter(None, text.split(",")):
        key, sep, val = part.partition("=")
        if not sep:
            raise ConfigError(f"bad option {part!r}; expected key=value")
        try:
            opts[key.strip()] = int(val)
        except ValueError:
            try:
                opts[key.strip()] = float(val)
            except ValueError:
                raise ConfigError(f"option {key!r} must be numeric, got {val!r}") from None
    return opts


def _parse_estimator(desc, kind, kernel) -> _Desc:
    head, _, rest = desc.partition("@")
    if kind == "test":
        family, _, variant = head.partition("-")
        if family not in ("kendall", "wilcoxon") or variant not in ("classical", "ss", "plug"):
            raise UnknownNameError("test estimator", desc, difflib.get_close_matches(
                desc, [f"{f}-{v}" for f in ("kendall", "wilcoxon") for v in ("classical", "ss", "plug")]))
        if family != kernel.name:
            raise ConfigError(f"estimator {desc!r} does not match kernel {kernel.name!r}")
        if variant == "classical":
            if rest:
                raise ConfigError(f"{desc!r} takes no regressor")
            return _Desc(desc, "test-classical")
        if not rest:
            raise ConfigError(f"{desc!r} needs a regressor, e.g. {head}@knn:k=5")
        return _Desc(desc, f"test-{variant}", parse_regressor(rest))
    if head in ("classical", "oracle", "adapt-oracle"):
        if rest:
            raise ConfigError(f"{head!r} takes no regressor")
        if head == "adapt-oracle" and (kernel.separable is None or kernel.order != 2):
            raise ConfigError("adapt-oracle needs a separable order-2 kernel")
        return _Desc(desc, head)
    if head in ("cross", "plug", "single", "adapt"):
        if not rest:
            raise ConfigError(f"{head!r} needs a regressor, e.g. {head}@knn:k=5")
        if head == "adapt":
            if kernel.order != 2:
                raise ConfigError("adaptive estimators need an order-2 kernel")
            name, _, opts = rest.partition(":")
            if name == "density":
                o = _parse_kv(opts)
                bad = set(o) - {"k", "B", "bw"}
                if bad:
                    raise ConfigError(f"unknown density options {sorted(bad)}")
                return _Desc(desc, "adapt-density", None, tuple(sorted(o.items())))
            if kernel.separable is None:
                raise ConfigError(f"adapt@<regressor> needs a separable kernel, not {kernel.name!r}")
        return _Desc(desc, head, parse_regressor(rest))
    raise UnknownNameError("estimator", desc,
                           difflib.get_close_matches(head, ["classical", "oracle", "cross", "plug",
                                                            "single", "adapt", "adapt-oracle"]))


# ----------------------------------------------------------- one repetition

class _RepContext:
    """Caches per labeled sample; ``full`` holds the largest unlabeled draw."""

    def __init__(self, cfg: SimConfig, kernel, model: Model, full: SemiDataset, rep, shared=None,
                 m_values=None):
        self.cfg, self.k, self.model, self.full, self.rep = cfg, kernel, model, full, rep
        self.m_values = list(m_values) if m_values else [full.m]
        self.cache = {}
        self.shared = {} if shared is None else shared  # survives across sweep groups
        h = hashlib.blake2b(digest_size=16)
        h.update(np.ascontiguousarray(full.labeled_x).tobytes())
        h.update(np.ascontiguousarray(full.unlabeled_x).tobytes())
        self.x_key = h.hexdigest()

    def get(self, key, fn):
        if key not in self.cache:
            self.cache[key] = fn()
        return self.cache[key]

    def sliced(self, m):
        f = self.full
        return SemiDataset(f.labeled_x, f.labeled_y, f.unlabeled_x[:m])

    @property
    def u(self):
        return self.get("u", lambda: u_statistic(self.k, self.full.labeled_y))

    def sigma2(self):
        return self.get("sigma2", lambda: jackknife_sigma2(self.k, self.full.labeled_y, u=self.u))

    def ell1(self):
        return self.get("ell1", lambda: ell1_hat_labeled(self.full, self.k))

    def unlabeled_range(self, fold):
        """Unlabeled rows a fold model ever scores: it scores the opposite fold.

        Fold 0 stands for the plug-in model trained on all labeled rows.
        """
        if fold == 0:
            return 0, max(self.m_values)
        halves = [m // 2 for m in self.m_values]
        if fold == 1:
            return min(halves), max(self.m_values)
        return 0, max(halves)

    def fold_predictions(self, spec, fold, rows, targets):
        """Predictions on all labeled rows and on the unlabeled rows in
        :meth:`unlabeled_range` (``nan`` elsewhere) for one fold model.

        k-NN predictions are neighbour averages, so neighbour indices are
        cached per training set and reused across targets and sweep points.
        """
        full = self.full
        lo, hi = self.unlabeled_range(fold)
        U = full.unlabeled_x[lo:hi]
        unl = np.full(full.m, np.nan)
        if isinstance(spec, KNNRegressor):
            key = ("nbrs", spec.k, fold, lo, hi, self.x_key)

            def neighbours():
                knn = clone(spec).fit(full.labeled_x[rows], np.zeros(rows.size))
                nb_unl = knn.neighbors(U) if hi > lo else np.empty((0, spec.k), int)
                return rows.copy(), knn.neighbors(full.labeled_x), nb_unl

            cached_rows, nb_lab, nb_unl = self.shared_get(key, neighbours)
            if np.array_equal(cached_rows, rows):
                t = np.asarray(targets, dtype=np.float64)
                unl[lo:hi] = t[nb_unl].mean(axis=1)
                return t[nb_lab].mean(axis=1), unl
        model = fit_regressor(spec, full.labeled_x[rows], targets)
        if hi > lo:
            unl[lo:hi] = model.predict(U)
        return model.predict(full.labeled_x), unl

    def shared_get(self, key, fn):
        if key not in self.shared:
            self.shared[key] = fn()
        return self.shared[key]

    def cross_scores(self, key, spec, fold_targets, m):
        """Stacked cross-fit scores for the first ``m`` unlabeled rows.

        ``fold_targets(fold)`` returns the training rows and targets of a fold.
        """
        def build():
            return [self.fold_predictions(spec, fold, *fold_targets(fold)) for fold in (1, 2)]

        (L1, P1), (L2, P2) = self.get(key, build)
        n = self.full.n
        split = split_crossfit(n, m)
        lab = np.empty(n)
        lab[split.fold1_labeled] = L2[split.fold1_labeled]
        lab[split.fold2_labeled] = L1[split.fold2_labeled]
        g = m // 2
        return np.concatenate([lab, P2[:g], P1[g:m]])

    def plug_scores(self, key, spec, m):
        """Stacked scores of the model fitted on all labeled rows."""
        def build():
            ua = default_use_analytic(self.k)
            targets = ell1_hat_labeled(self.full, self.k, generic=not ua)
            return self.fold_predictions(spec, 0, np.arange(self.full.n), targets)

        lab, unl = self.get(key, build)
        return np.concatenate([lab, unl[:m]])


def _standardize(ctx, point, scores, n, m, psi):
    lh = lambda_from_parts(n, m, ctx.k.order, ctx.sigma2(), _resid(scores[:n], ctx.ell1()))
    return math.sqrt(n) * (point - psi) / math.sqrt(lh.lambda_hat)


def _resid(s, e1):
    d = np.asarray(s) - e1
    return float(np.mean((d - d.mean()) ** 2))


def _ell1_targets(ctx):
    split = split_crossfit(ctx.full)
    ua = default_use_analytic(ctx.k)
    return lambda fold: nested_targets(ctx.full, split, fold, ctx.k, ua)


def _phi_targets(ctx):
    split = split_crossfit(ctx.full)
    phi = np.asarray(ctx.k.separable(ctx.full.labeled_y), dtype=np.float64)
    return lambda fold: (split.labeled(fold), phi[split.labeled(fold)])


def _eval_mse(ctx: _RepContext, d: _Desc, m, psi):
    """``(point, standardized value or nan)`` for one estimator at one ``m``."""
    k, full, n = ctx.k, ctx.full, ctx.full.n
    nan = float("nan")
    if d.kind == "classical":
        scores = np.zeros(n)
        return ctx.u, _standardize(ctx, ctx.u, scores, n, 0, psi)
    if d.kind in ("oracle", "plug", "single"):
        if d.kind == "oracle":
            if ctx.model.psi1(full.labeled_x[:1]) is None:
                raise ConfigError(f"model {ctx.model.name!r} has no closed-form assistant")
            fn = ctx.model.psi1
        elif d.kind == "plug":
            scores = ctx.plug_scores(("plug", d.name), d.spec, m)
            point = corrected_point(ctx.u, k.order, scores, n)
            return point, _standardize(ctx, point, scores, n, m, psi)
        else:
            def train():
                aux = ctx.model.generate(n, 0, _aux_rng(ctx))
                return plug_model(aux, k, d.spec)
            fn = ctx.get(("single", d.name), train).predict
        lab = ctx.get(("lab", d.name), lambda: np.asarray(fn(full.labeled_x), dtype=np.float64))
        unl = ctx.get(("unl", d.name), lambda: np.asarray(fn(full.unlabeled_x), dtype=np.float64)
                      if full.m else np.empty(0))
        scores = np.concatenate([lab, unl[:m]])
        point = corrected_point(ctx.u, k.order, scores, n)
        return point, _standardize(ctx, point, scores, n, m, psi)
    if d.kind == "cross":
        scores = ctx.cross_scores(("cross", d.name), d.spec, _ell1_targets(ctx), m)
        point = corrected_point(ctx.u, k.order, scores, n)
        return point, _standardize(ctx, point, scores, n, m, psi)
    ds = ctx.sliced(m)
    if d.kind == "adapt":
        G = ctx.cross_scores(("phi", d.name), d.spec, _phi_targets(ctx), m)
        return u_adapt(ds, k, hooks_from_factors(ds, k, G, "regression")), nan
    if d.kind == "adapt-oracle":
        G = ctx.model.cond_mean(ds.all_x)
        if G is None:
            raise ConfigError(f"model {ctx.model.name!r} has no closed-form conditional mean")
        return u_adapt(ds, k, hooks_from_factors(ds, k, G, "oracle")), nan
    if d.kind == "adapt-density":
        o = dict(d.options)
        hooks = build_hooks_density(ds, k, knn_k=o.get("k"), bandwidth=float(o.get("bw", 0.0)),
                                    B=int(o.get("B", 200)),
                                    seed=seed_for(ctx.cfg.base_seed, ctx.rep, "density"))
        return u_adapt(ds, k, hooks), nan
    raise AssertionError(d.kind)


def _aux_rng(ctx):
    return stream(ctx.cfg.base_seed, ctx.rep, "auxiliary")


def _eval_test(ctx: _RepContext, d: _Desc, m):
    """``(point, z, reject)`` for one test at one ``m``."""
    family = ctx.k.name
    full, alpha = ctx.full, ctx.cfg.alpha
    if d.kind == "test-classical":
        fn = kendall_classical if family == "kendall" else wilcoxon_classical
        res = ctx.get(("classical-test",), lambda: fn(full.labeled_y, alpha, u=ctx.u))
    elif d.kind == "test-ss":
        scores = ctx.cross_scores(("cross", d.name), d.spec, _ell1_targets(ctx), m)
        res = ss_test_from_scores(family, ctx.sliced(m), scores, alpha, estimator="cross", u=ctx.u)
    else:
        scores = ctx.plug_scores(("plug", d.name), d.spec, m)
        res = ss_test_from_scores(family, ctx.sliced(m), scores, alpha, estimator="plug", u=ctx.u)
    return res.estimate, res.statistic, float(res.reject)


def _groups(cfg):
    """Sweep points grouped by labeled sample: same ``n`` and model params share a draw."""
    groups = {}
    for idx, p in enumerate(cfg.points()):
        key = (p["n"], json.dumps(p["params"], sort_keys=True))
        groups.setdefault(key, []).append(idx)
    return groups


def _run_block(cfg_dict, reps):
    cfg = SimConfig.from_dict(cfg_dict)
    points = cfg.points()
    descs = [_parse_estimator(e, cfg.kind, get_kernel(cfg.kernel)) for e in cfg.estimators]
    k = get_kernel(cfg.kernel)
    out = np.full((len(reps), len(points), len(descs), 3), np.nan)
    groups = _groups(cfg)
    for r_i, rep in enumerate(reps):
        shared = {}
        try:
            for (n, _), idxs in groups.items():
                model = make_model(cfg.model, **points[idxs[0]]["params"])
                m_max = max(points[i]["m"] for i in idxs)
                full = model.generate_rep(n, m_max, cfg.base_seed, rep)
                ctx = _RepContext(cfg, k, model, full, rep, shared,
                                  [points[i]["m"] for i in idxs])
                for i in idxs:
                    m = points[i]["m"]
                    for e_i, d in enumerate(descs):
                        if cfg.kind == "mse":
                            out[r_i, i, e_i, :2] = _eval_mse(ctx, d, m, model.psi)
                        else:
                            out[r_i, i, e_i] = _eval_test(ctx, d, m)
        except (SSUError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            raise SimulationError(
                f"repetition {rep} failed (base_seed={cfg.base_seed}, "
                f"rep seed={seed_for(cfg.base_seed, rep, 'labeled')}): "
                f"{type(exc).__name__}: {exc}") from exc
    return out


# ---------------------------------------------------------------- report

@dataclass
class SimReport:
    config: dict
    rows: list
    version: str = __version__
    schema_version: int = SCHEMA_VERSION
    wall_time: float = 0.0

    def row(self, estimator, param=""):
        for r in self.rows:
            if r["estimator"] == estimator and r["param"] == param:
                return r
        raise KeyError((estimator, param))

    def metric(self, estimator, metric, param=""):
        return self.row(estimator, param)[metric]

    def results(self):
        """Rows without timing metadata; equal across runs of the same config."""
        return json.loads(json.dumps(self.rows))

    def to_dict(self):
        return {"schema_version": self.schema_version, "version": self.version,
                "wall_time": self.wall_time, "config": self.config, "rows": self.rows}

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), indent=2, allow_nan=True, **kwargs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["experiment", "estimator", "param", "metric", "value"])
        exp = self.config.get("experiment", "")
        for r in self.rows:
            for key, val in r.items():
                if key in ("estimator", "param"):
                    continue
                w.writerow([exp, r["estimator"], r["param"], key, "" if val is None else repr(val)])
        return buf.getvalue()


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _aggregate(cfg: SimConfig, values) -> list:
    rows = []
    points = cfg.points()
    for p_i, p in enumerate(points):
        psi = make_model(cfg.model, **p["params"]).psi
        per = {}
        for e_i, name in enumerate(cfg.estimators):
            est = values[:, p_i, e_i, 0]
            err = est - psi
            row = {"estimator": name, "param": p["label"], "n": p["n"], "m": p["m"],
                   "psi": psi, "reps": int(est.size), "mean": float(np.mean(est)),
                   "bias": float(np.mean(err)), "variance": float(np.var(est)),
                   "mse": float(np.mean(err * err))}
            if cfg.kind == "mse":
                z = values[:, p_i, e_i, 1]
                row["kolmogorov"] = (empirical_kolmogorov(z) if np.all(np.isfinite(z)) else None)
            else:
                row["rejection_rate"] = float(np.mean(values[:, p_i, e_i, 2]))
                row["mean_statistic"] = float(np.mean(values[:, p_i, e_i, 1]))
            per[name] = row
        if cfg.kind == "mse":
            base = per["classical"]["mse"]
            for row in per.values():
                row["mse_ratio"] = _finite_or_none(base / row["mse"]) if row["mse"] > 0 else (
                    1.0 if base == 0 else None)
        rows.extend(per.values())
    return rows


def resolve_jobs(jobs=None):
    if jobs is None:
        env = os.environ.get("SSU_JOBS")
        if env is None:
            return 1
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError(f"SSU_JOBS must be an integer, got {env!r}") from None
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    return int(jobs)


def run_values(cfg: SimConfig, progress=None) -> np.ndarray:
    """Per-repetition raw values of shape ``(reps, points, estimators, 3)``.

    The last axis holds the point estimate, the standardized value (or test
    statistic) and, for tests, the rejection indicator.
    """
    cfg.validate()
    if cfg.base_seed is None:
        raise ConfigError("a base_seed is required for simulations")
    return map_rep_blocks(_run_block, cfg.to_dict(), cfg.reps, cfg.jobs, progress)


def map_rep_blocks(func, payload, reps, jobs=1, progress=None):
    """Run ``func(payload, rep_indices)`` over blocks and concatenate in rep order."""
    jobs = max(1, min(int(jobs), reps))
    size = reps if jobs == 1 else max(1, math.ceil(reps / (4 * jobs)))
    blocks = [list(range(s, min(s + size, reps))) for s in range(0, reps, size)]
    if jobs == 1:
        parts = []
        for b in blocks:
            parts.append(func(payload, b))
            if progress:
                progress(b[-1] + 1, reps)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(func, [payload] * len(blocks), blocks))
    return np.concatenate(parts, axis=0)


def _run(cfg: SimConfig, kind, progress=None) -> SimReport:
    if cfg.kind != kind:
        raise ConfigError(f"config kind is {cfg.kind!r}, expected {kind!r}")
    t0 = time.perf_counter()
    values = run_values(cfg, progress)
    rows = _aggregate(cfg, values)
    return SimReport(cfg.to_dict(), rows, wall_time=time.perf_counter() - t0)


def run_mse_experiment(cfg: SimConfig, progress=None) -> SimReport:
    """Bias, variance, MSE, MSE ratio against the classical U-statistic and Kolmogorov distance."""
    return _run(cfg, "mse", progress)


def run_test_experiment(cfg: SimConfig, progress=None) -> SimReport:
    """Rejection rates (size under the null, power otherwise)."""
    return _run(cfg, "test", progress)


def run_experiment(cfg: SimConfig, progress=None) -> SimReport:
    """Dispatch on ``cfg.kind``."""
    if cfg.kind == "adversarial":
        from .adversarial import run_be_adversarial

        return run_be_adversarial(cfg, progress=progress)
    return _run(cfg, cfg.kind, progress)
