"""End-to-end deformation pipeline driven by a :class:`~vgwarp.config.RunConfig`.

Stages run in order and each writes its artifacts as soon as it finishes,
so a failure leaves the earlier outputs in place:

``data`` -> ``fit`` -> ``register`` -> ``embed`` -> ``krige`` -> ``score``
"""
from __future__ import annotations

import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import sklearn

from . import __version__
from .config import RunConfig
from .deformation import cmds, embed, warped_distance_matrix
from .exceptions import PipelineError, VgwarpError
from .geometry import Partition
from .gp import KernelField, regular_grid, simulate
from .io import SpatialDataset, ingest_csv, sha256_file, split, transform, write_csv, write_json
from .kriging import SimpleKriging, correlation_map, fit_deformed
from .registration import register_set, smooth_and_extend
from .scoring import score_report
from .variogram import determine_ht, empirical_variogram, fit_matern_mle, sample_on_grid

logger = logging.getLogger(__name__)

STAGES = ("data", "fit", "register", "embed", "krige", "score")


@dataclass
class RunManifest:
    config_hash: str
    seeds: dict
    artifacts: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    versions: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)
    # In-memory results of the run; not serialized.
    state: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "artifacts": self.artifacts,
            "timings": self.timings,
            "versions": self.versions,
            "stages": self.stages,
        }


def _versions():
    return {
        "vgwarp": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
    }


class _Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.manifest = RunManifest(
            config_hash=cfg.hash(),
            seeds={"seed": cfg.seed, "split": cfg.split_seed, "fit": cfg.fit_seed},
            versions=_versions(),
        )
        self.state = self.manifest.state

    def artifact(self, path):
        path = Path(path)
        rel = path.relative_to(self.out).as_posix()
        self.manifest.artifacts = [a for a in self.manifest.artifacts if a["path"] != rel]
        self.manifest.artifacts.append({"path": rel, "sha256": sha256_file(path)})
        return path

    def csv(self, name, header, rows):
        return self.artifact(write_csv(self.out / name, header, rows))

    def json(self, name, obj):
        return self.artifact(write_json(self.out / name, obj))

    def write_manifest(self):
        self.manifest.artifacts.sort(key=lambda a: a["path"])
        return write_json(self.out / "manifest.json", self.manifest.to_dict())

    # ------------------------------------------------------------------
    def stage_data(self):
        cfg = self.cfg
        if cfg["mode"] == "simulate":
            sc = cfg["scenario"]
            g = sc["grid"]
            sites = regular_grid(g["xmin"], g["xmax"], g["ymin"], g["ymax"], int(g["nx"]), int(g["ny"]))
            regions = sc["regions"]
            part = Partition(np.array([r["box"] for r in regions], float))
            field_ = KernelField(
                part,
                np.array([r["kernel"] for r in regions], float),
                np.array([r.get("sigma", 1.0) for r in regions], float),
                float(sc["nu"]),
            )
            real = simulate(sites, field_, cfg.seed)
            data = SpatialDataset(sites, real.values)
            self.csv("realization.csv", ["x", "y", "value"], np.column_stack([sites, real.values]))
            if cfg["partition"].get("boxes"):
                part = Partition(np.array(cfg["partition"]["boxes"], float))
        else:
            d = cfg["data"]
            data = ingest_csv(d["path"], d["x"], d["y"], d["value"])
            part = Partition(np.array(cfg["partition"]["boxes"], float))
            self.manifest.stages.append({"stage": "ingest", "rows": len(data), "dropped": data.n_dropped,
                                         "duplicates": data.duplicates})
        part.regions_of(data.sites)
        data, tstate = transform(data, tuple(cfg["transform"]["chain"]))
        n_test = int(cfg["split"]["n_test"])
        if n_test > 0:
            train, test = split(data, cfg.split_seed, n_test)
        else:
            train, test = data, data.subset(np.array([], dtype=int))
        pg = cfg["prediction_grid"]
        grid = (
            regular_grid(pg["xmin"], pg["xmax"], pg["ymin"], pg["ymax"], int(pg["nx"]), int(pg["ny"]))
            if pg
            else np.zeros((0, 2))
        )
        if len(grid):
            part.regions_of(grid)
        self.state.update(data=data, part=part, train=train, test=test, grid=grid, tstate=tstate)

    def stage_fit(self):
        cfg, st = self.cfg, self.state
        part, train = st["part"], st["train"]
        reg = part.regions_of(train.sites)
        fit = cfg["fit"]
        models, records = [], []
        for r in range(part.k):
            sub = train.subset(np.flatnonzero(reg == r))
            res = fit_matern_mle(
                sub.sites, sub.values, fix_nu=fit["fix_nu"], with_nugget=cfg.with_nugget(),
                n_starts=int(fit["n_starts"]), seed=cfg.fit_seed + r, min_sites=int(fit["min_sites"]),
            )
            models.append(res.model)
            records.append({"region_id": r, **res.model.to_dict(), "loglik": res.loglik})
            ev = empirical_variogram(sub.sites, sub.values, n_bins=int(fit["n_bins"]))
            self.csv(f"variogram_region{r}.csv", ["bin_center", "semivariance", "count"], ev.rows())
        self.json("regional_models.json", records)
        st["models"] = models

    def stage_register(self):
        cfg, st = self.cfg, self.state
        rc = cfg["registration"]
        h_t = determine_ht(st["models"], float(rc["ht_rel_tol"]))
        curves = [sample_on_grid(m, h_t, int(rc["grid_m"])) for m in st["models"]]
        reg = register_set(curves, max_step=int(rc["max_step"]))
        bw = rc["bandwidth"] if rc["bandwidth"] is not None else h_t / 50.0
        warps = [smooth_and_extend(w.knots, w.warped, h_t, bw) for w in reg.warps]
        for r, w in enumerate(warps):
            self.csv(f"warp_region{r}.csv", ["h", "phi_of_h"], w.rows(512))
        self.json("warps.json", {
            "h_t": h_t, "bandwidth": bw, "iterations": reg.iterations, "converged": reg.converged,
            "scalings": reg.scalings, "translations": reg.translations,
        })
        st.update(h_t=h_t, registration=reg, warps=warps)

    def stage_embed(self):
        cfg, st = self.cfg, self.state
        sites = np.vstack([st["train"].sites, st["test"].sites, st["grid"]])
        n_obs = len(st["train"])
        D = warped_distance_matrix(sites, st["part"], st["warps"], n_observed=n_obs)
        ec = cfg["embedding"]
        if ec["psi"] is None:
            emb = embed(D, None, int(ec["psi_max"]), float(ec["epsilon"]))
            curve = emb.curve
        else:
            emb = embed(D, int(ec["psi"]))
            curve = np.array([(p, cmds(D, 2 + p).nmse) for p in range(int(ec["psi_max"]) + 1) if 2 + p <= D.n])
        self.csv("nmse_curve.csv", ["psi", "nmse"], [(int(p), v) for p, v in curve])
        header = ["site_id"] + [f"dim_{i + 1}" for i in range(emb.dim)] + ["is_observed"]
        rows = [[i, *c, int(i < n_obs)] for i, c in enumerate(emb.coords)]
        self.csv("embedding.csv", header, rows)
        st.update(dist=D, embedding=emb, all_sites=sites)

    def stage_krige(self):
        cfg, st = self.cfg, self.state
        train, emb = st["train"], st["embedding"]
        n_tr = len(train)
        fit = cfg["fit"]
        deformed = fit_deformed(
            emb.coords[:n_tr], train.values, with_nugget=cfg.deformed_with_nugget(),
            fix_nu=cfg.deformed_fix_nu(), seed=cfg.fit_seed + 100, n_starts=int(fit["n_starts"]),
        )
        stat = fit_matern_mle(
            train.sites, train.values, fix_nu=fit["fix_nu"], with_nugget=cfg.with_nugget(),
            seed=cfg.fit_seed + 200, n_starts=int(fit["n_starts"]),
        )
        self.json("deformed_model.json", deformed.to_dict())
        self.json("stationary_model.json", {**stat.model.to_dict(), "loglik": stat.loglik})

        sites = st["all_sites"][n_tr:]
        preds = {}
        for name, coords, model in (
            ("nonstationary", emb.coords, deformed.base),
            ("stationary", st["all_sites"], stat.model),
        ):
            k = SimpleKriging(coords[:n_tr], train.values, model)
            mean, sd = k.predict(coords[n_tr:])
            if k.n_clamped:
                logger.warning("%s: %d kriging variances clamped at zero", name, k.n_clamped)
            ids = np.arange(n_tr, n_tr + len(sites))
            self.csv(f"predictions_{name}.csv", ["site_id", "x", "y", "mean", "sd"],
                     np.column_stack([ids, sites, mean, sd]).tolist())
            preds[name] = (mean, sd)

        for i, anchor in enumerate(cfg["correlation"]["anchors"]):
            targets = st["grid"] if len(st["grid"]) else st["data"].sites
            rho = correlation_map(np.asarray(anchor, float), targets, st["warps"], st["part"], deformed)
            self.csv(f"correlation_anchor{i}.csv", ["x", "y", "rho"], np.column_stack([targets, rho]))
        st.update(deformed=deformed, stationary=stat.model, predictions=preds)

    def stage_score(self):
        st = self.state
        test = st["test"]
        n = len(test)
        if n == 0:
            logger.info("no test sites; skipping scores")
            return
        for name, (mean, sd) in st["predictions"].items():
            rep = score_report(name, mean[:n], sd[:n], test.values)
            self.json(f"scores_{name}.json", rep.to_dict())
            st.setdefault("scores", {})[name] = rep


def run_pipeline(cfg: RunConfig, until: str = "score") -> RunManifest:
    """Run all stages up to and including ``until`` and write the manifest.

    Raises
    ------
    PipelineError
        Carrying the failing stage name; artifacts of completed stages and a
        manifest are still written.
    """
    if until not in STAGES:
        raise ValueError(f"unknown stage {until!r}")
    run = _Run(cfg)
    run.out.mkdir(parents=True, exist_ok=True)
    try:
        for stage in STAGES:
            t0 = time.perf_counter()
            logger.info("stage %s", stage)
            try:
                getattr(run, f"stage_{stage}")()
            except (VgwarpError, OSError, np.linalg.LinAlgError, ValueError) as e:
                run.manifest.stages.append({"stage": stage, "status": "failed", "error": str(e)})
                raise PipelineError(stage, e) from e
            run.manifest.timings[stage] = round(time.perf_counter() - t0, 3)
            run.manifest.stages.append({"stage": stage, "status": "ok"})
            if stage == until:
                break
    finally:
        run.write_manifest()
    return run.manifest
