"""Run configuration read from TOML.

Example
-------
::

    mode = "simulate"
    seed = 7
    out = "runs/s3"

    [scenario]
    grid = { xmin = 0.0, xmax = 2.0, ymin = 0.0, ymax = 2.0, nx = 30, ny = 30 }
    nu = 0.6
    regions = [
      { box = [[0.0, 1.0], [0.0, 2.0]], kernel = [[0.04, 0.0], [0.0, 0.04]], sigma = 1.0 },
      { box = [[1.0, 2.0], [0.0, 2.0]], kernel = [[0.1849, 0.0], [0.0, 0.1849]], sigma = 1.0 },
    ]

    [split]
    n_test = 300

See the README for every key and its default.
"""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .exceptions import ConfigError

DEFAULTS = {
    "mode": "simulate",
    "seed": None,
    "out": "vgwarp-out",
    "scenario": {},
    "data": {"path": None, "x": "x", "y": "y", "value": "value"},
    "transform": {"chain": []},
    "partition": {},
    "fit": {
        "fix_nu": None,
        "with_nugget": None,
        "n_bins": 15,
        "n_starts": 5,
        "min_sites": 10,
    },
    "registration": {"grid_m": 512, "bandwidth": None, "ht_rel_tol": 0.05, "max_step": 10},
    "embedding": {"psi": None, "psi_max": 10, "epsilon": 1e-3},
    "deformed_fit": {"with_nugget": None, "fix_nu": None},
    "split": {"seed": None, "n_test": 0},
    "prediction_grid": {},
    "correlation": {"anchors": []},
}


def _merge(base, over, where=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown key '{where}{k}'")
        if isinstance(base[k], dict) and base[k] and not isinstance(v, dict):
            raise ConfigError(f"'{where}{k}' must be a table")
        if isinstance(base[k], dict) and base[k]:
            out[k] = _merge(base[k], v, f"{where}{k}.")
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    """Validated pipeline configuration (a nested dict plus helpers)."""

    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: Path | None = None

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def split_seed(self) -> int:
        s = self.raw["split"]["seed"]
        return self.seed + 1 if s is None else int(s)

    @property
    def fit_seed(self) -> int:
        return self.seed + 2

    def with_nugget(self) -> bool:
        v = self.raw["fit"]["with_nugget"]
        return (self.raw["mode"] == "ingest") if v is None else bool(v)

    def deformed_with_nugget(self) -> bool:
        v = self.raw["deformed_fit"]["with_nugget"]
        return self.with_nugget() if v is None else bool(v)

    def deformed_fix_nu(self):
        v = self.raw["deformed_fit"]["fix_nu"]
        return self.raw["fit"]["fix_nu"] if v is None else v

    def canonical(self) -> str:
        """Deterministic JSON text of the full configuration."""
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        """SHA-256 of the canonical configuration without the output directory."""
        raw = {k: v for k, v in self.raw.items() if k != "out"}
        return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _validate(cfg: RunConfig):
    r = cfg.raw
    _check(r["mode"] in ("simulate", "ingest"), f"mode must be 'simulate' or 'ingest', got {r['mode']!r}")
    _check(r["seed"] is not None, "seed is required (set it in the file or pass --seed)")
    _check(isinstance(r["seed"], int) and 0 <= r["seed"] < 2**64, "seed must be an unsigned 64-bit integer")
    if r["mode"] == "simulate":
        sc = r["scenario"]
        _check(bool(sc.get("regions")), "simulate mode needs [scenario] regions")
        _check("nu" in sc and sc["nu"] > 0, "scenario.nu must be positive")
        grid = sc.get("grid", {})
        for k in ("xmin", "xmax", "ymin", "ymax", "nx", "ny"):
            _check(k in grid, f"scenario.grid.{k} is required")
        for i, reg in enumerate(sc["regions"]):
            _check("box" in reg and "kernel" in reg, f"scenario.regions[{i}] needs box and kernel")
    else:
        path = r["data"]["path"]
        _check(path is not None, "ingest mode needs data.path")
        p = Path(path)
        if not p.is_absolute() and cfg.source is not None:
            p = cfg.source.parent / p
        r["data"]["path"] = str(p)
        _check(p.exists(), f"data file not found: {p}")
        _check(bool(r["partition"].get("boxes")), "ingest mode needs partition.boxes")
    for name in r["transform"]["chain"]:
        _check(name in ("log", "zscore"), f"unknown transform {name!r}")
    reg = r["registration"]
    _check(int(reg["grid_m"]) >= 8, "registration.grid_m must be at least 8")
    _check(0 < reg["ht_rel_tol"] < 1, "registration.ht_rel_tol must be in (0, 1)")
    _check(reg["bandwidth"] is None or reg["bandwidth"] > 0, "registration.bandwidth must be positive")
    emb = r["embedding"]
    _check(emb["psi"] is None or int(emb["psi"]) >= 0, "embedding.psi must be nonnegative")
    _check(int(emb["psi_max"]) >= 0, "embedding.psi_max must be nonnegative")
    _check(int(r["split"]["n_test"]) >= 0, "split.n_test must be nonnegative")
    fix = r["fit"]["fix_nu"]
    _check(fix is None or fix > 0, "fit.fix_nu must be positive")
    pg = r["prediction_grid"]
    if pg:
        for k in ("xmin", "xmax", "ymin", "ymax", "nx", "ny"):
            _check(k in pg, f"prediction_grid.{k} is required")
    return cfg


def from_dict(d: dict, source=None, seed=None, out=None) -> RunConfig:
    """Merge ``d`` over the defaults and validate.

    ``seed`` and ``out`` override the corresponding file entries.
    """
    raw = _merge(DEFAULTS, d)
    if seed is not None:
        raw["seed"] = int(seed)
    if out is not None:
        raw["out"] = str(out)
    return _validate(RunConfig(raw, Path(source) if source else None))


def load_config(path, seed=None, out=None) -> RunConfig:
    """Read and validate a TOML run configuration."""
    path = Path(path)
    text = path.read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    return from_dict(data, source=path, seed=seed, out=out)
