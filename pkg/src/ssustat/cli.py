"""``ssu`` command line: estimate, test, simulate, inspect.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every JSON payload carries ``schema_version``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import __version__
from .adaptive import build_hooks_density, build_hooks_mu2, u_adapt
from .data import load_dataset, split_crossfit, split_nested
from .estimators import u_classical, u_cross, u_plug
from .exceptions import (ConfigError, DataError, SimulationError, SSUError,
                         UnknownNameError, UnsupportedOperation)
from .kernels import get_kernel, kernel_names
from .infer_tests import TEST_METHODS, run_test
from .regress import parse_regressor, regressor_names
from .sim.engine import MSE_ESTIMATORS, SCHEMA_VERSION, TEST_ESTIMATORS, SimConfig, resolve_jobs
from .sim.models import model_names

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
ESTIMATE_METHODS = ("classical", "cross", "plug", "adapt")


class UsageError(SSUError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _catalogue():
    return "\n".join([
        "kernels:     " + ", ".join(kernel_names()),
        "estimators:  " + ", ".join(ESTIMATE_METHODS) + " (estimate)",
        "tests:       " + ", ".join(TEST_METHODS),
        "regressors:  " + ", ".join(regressor_names())
        + "  (e.g. knn:k=5, ols, ridge:lambda=0.01,bw=auto, partition:bins=8, const:value=0)",
        "hooks:       mu2:<regressor>, density:k=<int>,B=<int>,bw=<float>",
        "models:      " + ", ".join(model_names()),
        "simulation estimators: " + ", ".join(MSE_ESTIMATORS + TEST_ESTIMATORS),
    ])


def _add_data_args(p, unlabeled=True):
    p.add_argument("--labeled", required=True, help="CSV with y (or y1,y2) and x1..xd")
    if unlabeled:
        p.add_argument("--unlabeled", help="CSV with x1..xd")
    p.add_argument("--covariates", help="comma-separated covariate subset, e.g. x1,x3")
    p.add_argument("--shuffle-seed", type=int, help="permute rows with this seed before splitting")


def build_parser():
    fmt = argparse.RawDescriptionHelpFormatter
    parser = _Parser(prog="ssu", description="Semi-supervised U-statistics.",
                     epilog=_catalogue(), formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"ssu {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("estimate", help="point estimate and confidence interval",
                       epilog=_catalogue(), formatter_class=fmt)
    _add_data_args(p)
    p.add_argument("--kernel", required=True)
    p.add_argument("--estimator", default="cross", help="/".join(ESTIMATE_METHODS))
    p.add_argument("--regressor", default="knn:k=10")
    p.add_argument("--hooks", help="adaptive hooks: mu2:<regressor> or density:k=..,B=..")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--generic-ell1", action="store_true",
                   help="use the kernel-average first projection instead of the closed form")
    p.add_argument("--seed", type=int, help="seed for Monte Carlo density hooks")

    p = sub.add_parser("test", help="Kendall or Wilcoxon test", epilog=_catalogue(),
                       formatter_class=fmt)
    _add_data_args(p)
    p.add_argument("--method", required=True, help="/".join(TEST_METHODS))
    p.add_argument("--regressor", default="knn:k=25")
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("simulate", help="Monte Carlo experiment from a TOML config",
                       epilog=_catalogue(), formatter_class=fmt)
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", help="write long-format CSV here")
    p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    p.add_argument("--reps", type=int, help="repetitions (overrides the config)")
    p.add_argument("--jobs", type=int, help="worker processes (default: SSU_JOBS or 1)")
    p.add_argument("--echo-config", metavar="PATH",
                   help="write the resolved config as TOML ('-' for stderr)")
    p.add_argument("--progress", action="store_true", help="line-based progress on stderr")

    p = sub.add_parser("inspect", help="dataset summary and cross-fit split",
                       epilog=_catalogue(), formatter_class=fmt)
    _add_data_args(p)
    return parser


# ------------------------------------------------------------- helpers

def _emit(payload, stream=None):
    text = json.dumps({"schema_version": SCHEMA_VERSION, "version": __version__, **payload},
                      indent=2, default=_json_default)
    print(text, file=stream or sys.stdout)


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _load(args, responses_only=False):
    ds = load_dataset(args.labeled, getattr(args, "unlabeled", None),
                      require_covariates=not responses_only)
    if args.covariates:
        ds = ds.select_covariates([c.strip() for c in args.covariates.split(",") if c.strip()])
    if args.shuffle_seed is not None:
        ds = ds.permuted(args.shuffle_seed)
    return ds


def _parse_hooks(text):
    kind, _, rest = (text or "").partition(":")
    if kind == "mu2":
        return "mu2", parse_regressor(rest or "ols")
    if kind == "density":
        opts = {}
        for item in filter(None, rest.split(",")):
            key, eq, val = item.partition("=")
            if not eq or key not in ("k", "B", "bw"):
                raise ConfigError(f"bad density hook option {item!r}; allowed: k, B, bw")
            try:
                opts[key] = float(val) if key == "bw" else int(val)
            except ValueError:
                raise ConfigError(f"cannot parse {item!r}") from None
        return "density", opts
    raise ConfigError(f"unknown hooks {text!r}; use mu2:<regressor> or density:k=..,B=..")


# ------------------------------------------------------------ commands

def cmd_estimate(args):
    k = get_kernel(args.kernel)
    if args.estimator not in ESTIMATE_METHODS:
        import difflib

        raise UnknownNameError("estimator", args.estimator,
                               difflib.get_close_matches(args.estimator, ESTIMATE_METHODS)
                               or list(ESTIMATE_METHODS))
    if not 0 < args.alpha < 1:
        raise ConfigError(f"--alpha must lie in (0, 1), got {args.alpha}")
    if args.estimator == "adapt":
        kind, opts = _parse_hooks(args.hooks or "mu2:ols")
        if kind == "density" and opts.get("B", 200) and args.seed is None:
            raise UsageError("density hooks draw Monte Carlo samples; pass --seed")
    spec = parse_regressor(args.regressor)
    ds = _load(args, responses_only=args.estimator == "classical")
    if args.estimator == "classical":
        est = u_classical(ds, k, alpha=args.alpha)
    elif args.estimator == "cross":
        est = u_cross(ds, k, spec, alpha=args.alpha, generic_ell1=args.generic_ell1)
    elif args.estimator == "plug":
        est = u_plug(ds, k, spec, alpha=args.alpha, generic_ell1=args.generic_ell1)
    else:
        if kind == "mu2":
            hooks = build_hooks_mu2(ds, spec=opts, k=k)
        else:
            hooks = build_hooks_density(ds, k, knn_k=opts.get("k"), bandwidth=opts.get("bw", 0.0),
                                        B=opts.get("B", 200), seed=args.seed)
        point = u_adapt(ds, k, hooks)
        _emit({"result": {"point": point, "method": "adapt", "n": ds.n, "m": ds.m,
                          "kernel": k.name, "hooks": hooks.provenance, "draws": hooks.draws}})
        return EXIT_OK
    out = est.to_dict()
    out["kernel"] = k.name
    if not math.isfinite(est.lambda_hat) or est.diagnostics.get("clamped"):
        out["diagnostics"]["warning"] = "variance estimate clamped at the floor"
    _emit({"result": out})
    return EXIT_OK


def cmd_test(args):
    if args.method not in TEST_METHODS:
        import difflib

        raise UnknownNameError("test method", args.method,
                               difflib.get_close_matches(args.method, TEST_METHODS) or list(TEST_METHODS))
    if not 0 < args.alpha < 1:
        raise ConfigError(f"--alpha must lie in (0, 1), got {args.alpha}")
    classical = args.method.endswith("classical")
    spec = None if classical else parse_regressor(args.regressor)
    ds = _load(args, responses_only=classical)
    res = run_test(args.method, ds, spec, args.alpha)
    _emit({"result": res.to_dict()})
    return EXIT_OK


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    return data


def cmd_simulate(args):
    data = load_config(args.config)
    if args.seed is not None:
        data["base_seed"] = args.seed
    if args.reps is not None:
        data["reps"] = args.reps
    data["jobs"] = resolve_jobs(args.jobs if args.jobs is not None else None)
    if data.get("base_seed") is None:
        raise UsageError("simulate needs a seed: pass --seed or set base_seed in the config")
    cfg = SimConfig.from_dict(data)
    if args.echo_config:
        text = tomli_w.dumps(cfg.to_dict())
        if args.echo_config == "-":
            sys.stderr.write(text)
        else:
            with open(args.echo_config, "w", encoding="utf-8") as fh:
                fh.write(text)
    from .sim.engine import run_experiment

    progress = None
    if args.progress:
        def progress(done, total):
            print(f"reps {done}/{total}", file=sys.stderr, flush=True)
    report = run_experiment(cfg, progress=progress)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    else:
        print(report.to_json())
    return EXIT_OK


def cmd_inspect(args):
    ds = _load(args)
    payload = {"n": ds.n, "m": ds.m, "d": ds.d, "q": ds.q,
               "covariates": list(ds.covariate_names), "responses": list(ds.response_names)}
    try:
        split = split_crossfit(ds)
    except DataError as exc:
        payload["split"] = {"error": str(exc)}
    else:
        def rng(idx):
            return [int(idx[0]), int(idx[-1])] if len(idx) else []

        folds = {}
        for fold in (1, 2):
            entry = {"labeled": len(split.labeled(fold)), "labeled_range": rng(split.labeled(fold)),
                     "unlabeled": len(split.unlabeled(fold)),
                     "unlabeled_range": rng(split.unlabeled(fold))}
            try:
                nest = split_nested(split, fold)
                entry["nested"] = {"part_a": rng(nest.part_a), "part_b": rng(nest.part_b)}
            except DataError as exc:
                entry["nested"] = {"error": str(exc)}
            folds[f"fold{fold}"] = entry
        payload["split"] = folds
    _emit({"result": payload})
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "test": cmd_test, "simulate": cmd_simulate,
            "inspect": cmd_inspect}


def _exit_code(exc):
    if isinstance(exc, SimulationError) and exc.__cause__ is not None:
        return _exit_code(exc.__cause__)
    if isinstance(exc, (UsageError, UnknownNameError, ConfigError, UnsupportedOperation)):
        return EXIT_USAGE
    if isinstance(exc, (DataError, FileNotFoundError, IsADirectoryError, PermissionError)):
        return EXIT_DATA
    return EXIT_NUMERIC


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return COMMANDS[args.command](args)
    except (SSUError, OSError, ArithmeticError) as exc:
        code = _exit_code(exc)
        print(f"ssu: error: {exc}", file=sys.stderr)
        if code == EXIT_NUMERIC:
            _emit({"error": {"type": type(exc).__name__, "message": str(exc)}})
        return code


if __name__ == "__main__":
    sys.exit(main())
