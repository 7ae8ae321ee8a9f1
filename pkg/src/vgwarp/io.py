"""Datasets, transforms, splits and deterministic CSV/JSON writers."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .exceptions import DataError, ParameterError
from .gp import make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpatialDataset:
    """Observed values at two-dimensional sites.

    Attributes
    ----------
    sites : ndarray, shape (n, 2)
    values : ndarray, shape (n,)
    ids : ndarray, shape (n,)
        Stable site identifiers (row order of the source).
    n_dropped : int
        Rows discarded at ingest because of missing values.
    duplicates : bool
        Whether two rows share coordinates.
    transforms : tuple
        Names of the transforms applied so far.
    """

    sites: np.ndarray
    values: np.ndarray
    ids: np.ndarray = None
    n_dropped: int = 0
    duplicates: bool = False
    transforms: tuple = ()

    def __post_init__(self):
        sites = np.asarray(self.sites, float)
        values = np.asarray(self.values, float)
        if sites.ndim != 2 or sites.shape[1] != 2 or len(sites) != len(values):
            raise ParameterError("sites must have shape (n, 2) and match values")
        ids = np.arange(len(values)) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.values)

    def subset(self, idx) -> "SpatialDataset":
        idx = np.asarray(idx)
        return replace(self, sites=self.sites[idx], values=self.values[idx], ids=self.ids[idx])


def _missing(cell):
    return cell.strip().lower() in ("", "na", "nan", "null")


def ingest_csv(path, x="x", y="y", value="value") -> SpatialDataset:
    """Read a headed CSV file with coordinate and value columns.

    Rows with a missing cell in any of the three columns are dropped and
    counted. A cell that is present but not numeric is an error reporting
    its line number.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        try:
            cols = [header.index(c) for c in (x, y, value)]
        except ValueError:
            raise DataError(f"{path}: header must contain columns {x!r}, {y!r}, {value!r}") from None
        rows, dropped = [], 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) <= max(cols):
                raise DataError(f"{path}:{lineno}: expected at least {max(cols) + 1} fields")
            cells = [row[c] for c in cols]
            if any(_missing(c) for c in cells):
                dropped += 1
                continue
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                raise DataError(f"{path}:{lineno}: cannot parse {cells!r} as numbers") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no usable rows")
    arr = np.array(rows)
    dup = len(np.unique(arr[:, :2], axis=0)) < len(arr)
    if dropped:
        logger.info("dropped %d row(s) with missing values", dropped)
    if dup:
        logger.warning("%s: duplicate coordinates present", path)
    return SpatialDataset(arr[:, :2], arr[:, 2], n_dropped=dropped, duplicates=bool(dup))


@dataclass(frozen=True)
class TransformState:
    """Parameters needed to undo a transform chain."""

    chain: tuple = ()
    mean: float = 0.0
    sd: float = 1.0

    def inverse(self, values):
        v = np.asarray(values, float)
        for name in reversed(self.chain):
            if name == "zscore":
                v = v * self.sd + self.mean
            elif name == "log":
                v = np.exp(v)
        return v

    def inverse_sd(self, sd):
        """Back-transform a standard deviation through the z-score step only."""
        return np.asarray(sd, float) * (self.sd if "zscore" in self.chain else 1.0)

    def to_dict(self):
        return {"chain": list(self.chain), "mean": self.mean, "sd": self.sd}


TRANSFORMS = ("log", "zscore")


def transform(data: SpatialDataset, chain=()):
    """Apply ``log`` and/or ``zscore`` in the given order.

    Returns
    -------
    (SpatialDataset, TransformState)
    """
    v = data.values.copy()
    mean, sd = 0.0, 1.0
    for name in chain:
        if name == "log":
            bad = np.flatnonzero(v <= 0)
            if len(bad):
                raise DataError(f"log transform needs positive values; offending site ids {data.ids[bad].tolist()}")
            v = np.log(v)
        elif name == "zscore":
            mean = float(v.mean())
            sd = float(v.std())
            if sd <= 0:
                raise DataError("z-score of constant values")
            v = (v - mean) / sd
        else:
            raise ParameterError(f"unknown transform {name!r}; choose from {TRANSFORMS}")
    out = replace(data, values=v, transforms=data.transforms + tuple(chain))
    return out, TransformState(tuple(chain), mean, sd)


def split(data: SpatialDataset, seed, n_test):
    """Seeded uniform train/test split without replacement.

    Returns
    -------
    (train, test) : SpatialDataset
        Both keep the original row order.
    """
    n = len(data)
    if not 0 <= n_test < n:
        raise ParameterError(f"n_test must be in [0, {n}), got {n_test}")
    perm = make_rng(seed).permutation(n)
    test = np.sort(perm[:n_test])
    train = np.sort(perm[n_test:])
    return data.subset(train), data.subset(test)


# --------------------------------------------------------------------------
# Writers. Floats use the shortest round-trip repr, so equal numbers give
# equal bytes.


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")
    return path


def read_csv_table(path):
    """Header and float rows of a CSV written by :func:`write_csv`."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(c) for c in r] for r in reader if r]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_realization(path, sites, values):
    return write_csv(path, ["x", "y", "value"], np.column_stack([sites, values]))


__all__ = [
    "SpatialDataset",
    "TransformState",
    "ingest_csv",
    "read_csv_table",
    "sha256_file",
    "split",
    "transform",
    "write_csv",
    "write_json",
    "write_realization",
]

