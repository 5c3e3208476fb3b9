"""Semi-supervised datasets, CSV ingestion and the deterministic fold rules.

Index conventions are 0-based throughout.  Labeled rows occupy positions
``0..n-1`` and unlabeled rows positions ``n..n+m-1`` of the stacked design,
so the unlabeled folds carry global positions (``n + j``).
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ._validation import check_covariates, check_responses
from .exceptions import DataError, FoldTooSmallError


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def _frozen_idx(a):
    a = np.asarray(a, dtype=np.intp).copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SemiDataset:
    """Labeled pairs ``(labeled_x, labeled_y)`` plus unlabeled covariates.

    Arrays are copied and made read-only, so instances can be shared across
    threads and processes.
    """

    labeled_x: np.ndarray
    labeled_y: np.ndarray
    unlabeled_x: np.ndarray
    covariate_names: tuple = ()
    response_names: tuple = ()

    def __init__(self, labeled_x, labeled_y, unlabeled_x=None,
                 covariate_names=(), response_names=()):
        lx = check_covariates(labeled_x, "labeled_x")
        ly = check_responses(labeled_y, "labeled_y")
        if ly.shape[0] != lx.shape[0]:
            raise DataError(
                f"labeled_x has {lx.shape[0]} rows but labeled_y has {ly.shape[0]}"
            )
        if unlabeled_x is None:
            ux = np.empty((0, lx.shape[1]))
        else:
            ux = check_covariates(unlabeled_x, "unlabeled_x", allow_empty=True)
            if ux.shape[0] == 0:
                ux = np.empty((0, lx.shape[1]))
            elif ux.shape[1] != lx.shape[1]:
                raise DataError(
                    f"dimension mismatch: labeled d={lx.shape[1]}, unlabeled d={ux.shape[1]}"
                )
        d, q = lx.shape[1], ly.shape[1]
        cn = tuple(covariate_names) or tuple(f"x{j + 1}" for j in range(d))
        rn = tuple(response_names) or (("y",) if q == 1 else tuple(f"y{j + 1}" for j in range(q)))
        if len(cn) != d or len(rn) != q:
            raise DataError("column-name count does not match data shape")
        object.__setattr__(self, "labeled_x", _frozen(lx))
        object.__setattr__(self, "labeled_y", _frozen(ly))
        object.__setattr__(self, "unlabeled_x", _frozen(ux))
        object.__setattr__(self, "covariate_names", cn)
        object.__setattr__(self, "response_names", rn)

    @property
    def n(self):
        return self.labeled_x.shape[0]

    @property
    def m(self):
        return self.unlabeled_x.shape[0]

    @property
    def d(self):
        return self.labeled_x.shape[1]

    @property
    def q(self):
        return self.labeled_y.shape[1]

    @property
    def all_x(self):
        """Stacked covariates, labeled rows first (shape ``(n+m, d)``)."""
        return np.vstack([self.labeled_x, self.unlabeled_x])

    def with_unlabeled(self, unlabeled_x):
        return SemiDataset(self.labeled_x, self.labeled_y, unlabeled_x,
                           self.covariate_names, self.response_names)

    def select_covariates(self, names: Sequence[str]):
        """Restrict to a covariate subset (conditioning on a coarser sigma-field)."""
        missing = [c for c in names if c not in self.covariate_names]
        if missing or not names:
            raise DataError(f"unknown covariate columns: {missing or 'empty selection'}")
        cols = [self.covariate_names.index(c) for c in names]
        return SemiDataset(self.labeled_x[:, cols], self.labeled_y,
                           self.unlabeled_x[:, cols], tuple(names), self.response_names)

    def permuted(self, seed):
        """Row-shuffled copy; labeled and unlabeled rows are permuted separately."""
        rng = np.random.default_rng(seed)
        pl = rng.permutation(self.n)
        pu = rng.permutation(self.m)
        return SemiDataset(self.labeled_x[pl], self.labeled_y[pl], self.unlabeled_x[pu],
                           self.covariate_names, self.response_names)


@dataclass(frozen=True)
class CrossFitSplit:
    fold1_labeled: np.ndarray
    fold2_labeled: np.ndarray
    fold1_unlabeled: np.ndarray
    fold2_unlabeled: np.ndarray
    n: int
    m: int

    def labeled(self, fold):
        return self.fold1_labeled if _fold(fold) == 1 else self.fold2_labeled

    def unlabeled(self, fold):
        """Global positions (``n + j``) of the fold's unlabeled rows."""
        return self.fold1_unlabeled if _fold(fold) == 1 else self.fold2_unlabeled

    def unlabeled_local(self, fold):
        return self.unlabeled(fold) - self.n

    def fold_of(self):
        """Fold id (1 or 2) of every stacked position ``0..n+m-1``."""
        out = np.full(self.n + self.m, 2, dtype=np.int8)
        out[self.fold1_labeled] = 1
        out[self.fold1_unlabeled] = 1
        return out


@dataclass(frozen=True)
class NestedSplit:
    part_a: np.ndarray
    part_b: np.ndarray
    fold: int = field(default=1)


def _fold(fold):
    if fold not in (1, 2):
        raise DataError(f"fold must be 1 or 2, got {fold!r}")
    return fold


def split_crossfit(ds_or_n, m=None) -> CrossFitSplit:
    """First-half/second-half split of labeled and unlabeled rows.

    Accepts a :class:`SemiDataset` or the pair ``(n, m)``.
    """
    if isinstance(ds_or_n, SemiDataset):
        n, m = ds_or_n.n, ds_or_n.m
    else:
        n, m = int(ds_or_n), int(m or 0)
    if n < 2:
        raise FoldTooSmallError(f"cross-fitting needs n >= 2 labeled rows, got {n}")
    h, g = n // 2, m // 2
    return CrossFitSplit(
        fold1_labeled=_frozen_idx(np.arange(0, h)),
        fold2_labeled=_frozen_idx(np.arange(h, n)),
        fold1_unlabeled=_frozen_idx(np.arange(n, n + g)),
        fold2_unlabeled=_frozen_idx(np.arange(n + g, n + m)),
        n=n,
        m=m,
    )


def split_nested(split: CrossFitSplit, fold, n=None) -> NestedSplit:
    """Split a fold's labeled indices into ``part_a`` (first floor(n/4)) and the rest."""
    n = split.n if n is None else int(n)
    idx = split.labeled(fold)
    if idx.size < 2:
        raise FoldTooSmallError(f"fold {fold} has {idx.size} labeled rows; need >= 2")
    a = n // 4
    if a < 1 or a >= idx.size:
        raise FoldTooSmallError(
            f"nested split of fold {fold} (size {idx.size}) with n={n} leaves an empty part"
        )
    return NestedSplit(part_a=_frozen_idx(idx[:a]), part_b=_frozen_idx(idx[a:]), fold=fold)


# ---------------------------------------------------------------- CSV I/O

_X_COL = re.compile(r"^x(\d+)$")


@dataclass(frozen=True)
class Schema:
    """Column selection; ``None`` fields are detected from the header."""

    responses: Optional[tuple] = None
    covariates: Optional[tuple] = None


def _detect_responses(cols):
    if "y" in cols:
        return ("y",)
    if "y1" in cols and "y2" in cols:
        return ("y1", "y2")
    raise DataError("labeled file needs a 'y' column or 'y1','y2' columns")


def _detect_covariates(cols):
    found = sorted((int(_X_COL.match(c).group(1)), c) for c in cols if _X_COL.match(c))
    if not found:
        raise DataError("no covariate columns named x1..xd")
    idx = [i for i, _ in found]
    if idx != list(range(1, len(idx) + 1)):
        raise DataError(f"covariate columns must be x1..xd without gaps, found {[c for _, c in found]}")
    return tuple(c for _, c in found)


def _read(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: cannot parse CSV ({exc})") from None
    frame.columns = [str(c).strip() for c in frame.columns]
    return path, frame


def _numeric(frame, cols, path):
    missing = [c for c in cols if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}")
    out = np.empty((len(frame), len(cols)))
    for j, c in enumerate(cols):
        for i, cell in enumerate(frame[c]):
            text = cell.strip()
            if text == "":
                raise DataError(f"{path}: empty cell in column {c!r}, row {i + 2}")
            try:
                out[i, j] = float(text)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {cell!r} in column {c!r}, row {i + 2}"
                ) from None
    if not np.all(np.isfinite(out)):
        raise DataError(f"{path}: non-finite value")
    return out


def load_dataset(labeled_path, unlabeled_path=None, schema: Optional[Schema] = None, *,
                 require_covariates=True) -> SemiDataset:
    """Read a labeled CSV (responses + covariates) and an optional unlabeled CSV.

    With ``require_covariates=False`` a labeled file without ``x`` columns is
    accepted for response-only work (classical estimates and tests); it gets
    one constant placeholder covariate, which no such computation reads.
    """
    schema = schema or Schema()
    lpath, lab = _read(labeled_path)
    if len(lab) == 0:
        raise DataError(f"{lpath}: zero labeled rows")
    resp = schema.responses or _detect_responses(lab.columns)
    if (not require_covariates and unlabeled_path is None and schema.covariates is None
            and not any(_X_COL.match(c) for c in lab.columns)):
        y = _numeric(lab, resp, lpath)
        return SemiDataset(np.zeros((len(lab), 1)), y, None, covariate_names=("_none",),
                           response_names=resp)
    cov = schema.covariates or _detect_covariates(lab.columns)
    y = _numeric(lab, resp, lpath)
    x = _numeric(lab, cov, lpath)
    ux = None
    if unlabeled_path is not None:
        upath, unl = _read(unlabeled_path)
        if schema.covariates is None:
            ucov = _detect_covariates(unl.columns)
            if len(ucov) != len(cov):
                raise DataError(
                    f"dimension mismatch: labeled d={len(cov)}, unlabeled d={len(ucov)}"
                )
        ux = _numeric(unl, cov, upath) if len(unl) else np.empty((0, len(cov)))
    return SemiDataset(x, y, ux, covariate_names=cov, response_names=resp)


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def save_dataset(ds: SemiDataset, labeled_path, unlabeled_path=None):
    """Write CSVs using shortest round-trip float text (``repr``).

    Loading a file written here and saving it again reproduces it byte for byte.
    """
    _write(labeled_path, list(ds.response_names) + list(ds.covariate_names),
           np.hstack([ds.labeled_y, ds.labeled_x]))
    if unlabeled_path is not None:
        _write(unlabeled_path, list(ds.covariate_names), ds.unlabeled_x)
