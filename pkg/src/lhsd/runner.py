"""Benchmark and diagnostics drivers behind the CLI."""
from __future__ import annotations

import dataclasses
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import diagnostics as diag
from .baselines import NbConfig, flipd, flipd_hutch, lidl, lpca, nb
from .config import DatasetConfig, ExperimentConfig
from .datasets import (FunnelParams, LabeledDataset, MixtureSpec, MoonParams,
                       generate_funnel, generate_mixture, generate_moon, idr_embed, mae)
from .errors import ConfigError, LHSDError
from .estimator import lhsd_estimate
from .io import read_dataset, write_csv
from .score_field import AffineGaussianScoreField, MixtureScoreField, PerturbedScoreField

log = logging.getLogger(__name__)

PARTIAL_MARKER = "PARTIAL"


@dataclass
class Problem:
    """Evaluation points (clean coordinates) with the oracle that scores them."""

    name: str
    field: object
    points: np.ndarray
    gt_lid: np.ndarray
    component_id: np.ndarray
    reference: np.ndarray
    n_ref: int


def _coerce(value, default):
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        return tuple(float(v) for v in value.split(","))
    return value


def _from_params(cls, params, **fixed):
    """Instantiate a parameter dataclass from string-valued config entries."""
    kwargs = dict(fixed)
    names = {f.name.lower(): f for f in dataclasses.fields(cls)}
    for key, raw in params.items():
        f = names.get(key.lower())
        if f is None or f.name in kwargs:
            continue
        default = f.default if f.default is not dataclasses.MISSING else None
        try:
            if f.name == "component_dims":
                kwargs[f.name] = tuple(int(v) for v in raw.split(","))
            elif default is None:
                kwargs[f.name] = int(raw)
            else:
                kwargs[f.name] = _coerce(raw, default)
        except ValueError as exc:
            raise ConfigError(f"{cls.__name__}.{f.name}: cannot parse {raw!r}") from exc
    try:
        return cls(**kwargs)
    except (TypeError, LHSDError) as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from exc


def make_dataset(dcfg: DatasetConfig, seed, schedule=None):
    """Generate (or load) the dataset; returns ``(dataset, affine_field_or_None)``."""
    p = dcfg.params
    field = None
    if dcfg.generator == "mixture":
        ds = generate_mixture(_from_params(MixtureSpec, p, seed=int(p.get("seed", seed))))
    elif dcfg.generator == "moon":
        ds = generate_moon(_from_params(MoonParams, p, seed=int(p.get("seed", seed))))
    elif dcfg.generator == "funnel":
        ds = generate_funnel(_from_params(FunnelParams, p, seed=int(p.get("seed", seed))))
    elif dcfg.generator == "affine":
        try:
            dim, d, n = int(p["dim"]), int(p["intrinsic_dim"]), int(p["n"])
        except (KeyError, ValueError) as exc:
            raise ConfigError("affine datasets need integer dim, intrinsic_dim and n") from exc
        s = int(p.get("seed", seed))
        field = AffineGaussianScoreField.random(dim, d, float(p.get("scale", 1.0)), s,
                                                schedule=schedule)
        pts = field.sample(n, np.random.default_rng([s, 1]))
        ds = LabeledDataset(pts, np.full(n, float(d)), np.zeros(n, dtype=int),
                            {"generator": "affine", "seed": s, "params": dict(p)})
    elif dcfg.generator == "file":
        ds = read_dataset(p["path"])
    else:
        raise ConfigError(f"unknown generator {dcfg.generator!r}")
    if dcfg.idr_target_D:
        if field is not None:
            raise ConfigError("IDR embedding of an affine oracle dataset is not supported")
        ds = idr_embed(ds, dcfg.idr_target_D, dcfg.idr_features, seed, dcfg.idr_clamp)
    return ds, field


def build_problem(cfg: ExperimentConfig, dcfg: DatasetConfig) -> Problem:
    ds, affine = make_dataset(dcfg, cfg.seed, cfg.schedule)
    n_ref = dcfg.num_reference
    if n_ref < 0 or n_ref >= len(ds):
        raise ConfigError(f"[{dcfg.name}] num_reference={n_ref} leaves no evaluation points")
    ref = ds.points[:n_ref] if n_ref else ds.points
    ev = ds.subset(slice(n_ref, None)) if n_ref else ds
    if dcfg.num_eval is not None:
        ev = ev.subset(slice(0, dcfg.num_eval))
    inner_kind = cfg.perturbation_inner if cfg.oracle == "perturbed" else cfg.oracle
    if inner_kind == "affine":
        if affine is None:
            raise ConfigError("the affine oracle needs an affine dataset generator")
        field = affine
    else:
        field = MixtureScoreField(ref, cfg.schedule)
    if cfg.oracle == "perturbed":
        field = PerturbedScoreField(field, cfg.epsilon, cfg.perturbation_seed,
                                    cfg.perturbation_mode)
    return Problem(dcfg.name, field, ev.points, ev.gt_lid, ev.component_id, ref,
                   len(ref) if affine is None else 0)


def resolve_jobs(jobs=None):
    env = os.environ.get("LHSD_JOBS")
    if env:
        try:
            jobs = int(env)
        except ValueError as exc:
            raise ConfigError(f"LHSD_JOBS must be an integer, got {env!r}") from exc
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    return jobs


def estimate_point(method, field, x_clean, t, cfg: ExperimentConfig, point_index,
                   reference=None):
    """One estimate at a clean data point. Returns a result dict."""
    mu, _ = field.kernel(t)
    x = mu * np.asarray(x_clean, dtype=float)
    out = {"hvp_calls": 0, "truncated_probes": 0, "failed_probes": 0, "probe_std": ""}
    if method == "lhsd":
        slq = cfg.slq
        if slq.m > field.dim:
            log.warning("m=%d exceeds D=%d; clamping", slq.m, field.dim)
            slq = dataclasses.replace(slq, m=field.dim)
        rec = lhsd_estimate(field, x, t, cfg.filter, slq, point_index, cfg.lenient)
        out.update(estimate=rec.estimate, hvp_calls=rec.hvp_calls,
                   truncated_probes=rec.truncated_probes, failed_probes=rec.failed_probes,
                   probe_std=float(np.nanstd(rec.per_probe)))
    elif method == "flipd":
        out["estimate"] = flipd(field, x, t)
    elif method == "flipd-hutch":
        rec = flipd_hutch(field, x, t, cfg.hutch_K, cfg.seed, point_index)
        out.update(estimate=rec.estimate, hvp_calls=rec.hvp_calls,
                   probe_std=float(np.std(rec.per_probe)))
    elif method == "lidl":
        out["estimate"] = lidl(field, x, t, cfg.lidl_L)
    elif method == "nb":
        ncfg = NbConfig(num_scores=cfg.nb_M, rank_rule=cfg.nb_rank_rule,
                        svd_limit=cfg.dense_limit)
        out["estimate"] = float(nb(field, x, t, ncfg, cfg.seed, point_index))
    elif method == "lpca":
        k = min(cfg.lpca_k, len(reference) - 1)
        out["estimate"] = float(lpca(reference, x_clean, k))
    else:
        raise ConfigError(f"unknown method {method!r}")
    return out


_WORKER = {}


def _init_worker(state):
    _WORKER.clear()
    _WORKER.update(state)


def _work(index):
    w = _WORKER
    start = time.perf_counter()
    try:
        out = estimate_point(w["method"], w["field"], w["points"][index], w["t"], w["cfg"],
                             index, w["reference"])
    except LHSDError as exc:
        return index, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - start
    return index, out, None, time.perf_counter() - start


def map_points(method, problem: Problem, t, cfg: ExperimentConfig, jobs=1):
    """Evaluate ``method`` at every point; results are ordered by point index."""
    state = {"method": method, "field": problem.field, "points": problem.points, "t": t,
             "cfg": cfg, "reference": problem.reference}
    indices = range(len(problem.points))
    if jobs <= 1:
        _init_worker(state)
        return [_work(i) for i in indices]
    chunk = max(1, len(indices) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                             initargs=(state,)) as pool:
        return list(pool.map(_work, indices, chunksize=chunk))


def diagnostic_points(problem: Problem, count, seed):
    n = len(problem.points)
    if count >= n:
        return problem.points
    idx = np.sort(np.random.default_rng([seed, 7]).choice(n, count, replace=False))
    return problem.points[idx]


def diagnose(problem: Problem, cfg: ExperimentConfig):
    """Transition-mass sweep and safe zone for one problem."""
    tc = cfg.time
    pts = diagnostic_points(problem, tc.diag_points, cfg.seed)
    curve = diag.sweep(problem.field, pts, tc.grid_values(), cfg.filter, cfg.slq, tc.delta,
                       tc.delta_mode, None, cfg.dense_limit)
    zone = diag.safe_zone(curve, filter_params=cfg.filter, m_safe=tc.m_safe,
                          m_peak=tc.m_peak)
    return curve, zone, diag.select_t(zone, curve.t_grid)


def resolve_t(problem: Problem, cfg: ExperimentConfig):
    if cfg.time.t is not None and not cfg.time.auto:
        return cfg.time.t
    if not cfg.time.auto:
        raise ConfigError("set t or enable automatic t selection")
    _, zone, t = diagnose(problem, cfg)
    if t is None:
        raise LHSDError(f"[{problem.name}] no safe zone on the t grid; set t explicitly")
    log.info("[%s] safe zone %s, using t=%.6g", problem.name, zone, t)
    return t


def _mark_partial(out_dir, message):
    with open(os.path.join(out_dir, PARTIAL_MARKER), "w") as fh:
        fh.write(message + "\n")


RECORD_COLUMNS = ["dataset", "method", "point_index", "t", "estimate", "gt_lid",
                  "component_id", "hvp_calls", "truncated_probes", "failed_probes",
                  "probe_std", "n_ref"]


def run_benchmark(cfg: ExperimentConfig, jobs=None):
    """Per-point records, an MAE summary (datasets x methods) and timings.

    Returns ``{"summary": {dataset: {method: mae}}, "t": {dataset: t}}``.
    """
    jobs = resolve_jobs(jobs if jobs is not None else cfg.jobs)
    out_dir = cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    marker = os.path.join(out_dir, PARTIAL_MARKER)
    if os.path.exists(marker):
        os.remove(marker)
    if not cfg.datasets:
        raise ConfigError("no datasets configured")
    h = cfg.sha256()
    records, timings, summary, chosen = [], [], {}, {}
    try:
        for dcfg in cfg.datasets:
            problem = build_problem(cfg, dcfg)
            t = resolve_t(problem, cfg)
            chosen[problem.name] = t
            summary[problem.name] = {}
            for method in cfg.methods:
                results = map_points(method, problem, t, cfg, jobs)
                failures = [(i, err) for i, _, err, _ in results if err is not None]
                if failures:
                    i, err = failures[0]
                    raise LHSDError(f"[{problem.name}/{method}] point {i} failed: {err}")
                est = np.array([r["estimate"] for _, r, _, _ in results])
                summary[problem.name][method] = mae(est, problem.gt_lid)
                for i, r, _, secs in results:
                    records.append([problem.name, method, i, t, r["estimate"],
                                    problem.gt_lid[i], problem.component_id[i],
                                    r["hvp_calls"], r["truncated_probes"],
                                    r["failed_probes"], r["probe_std"], problem.n_ref])
                    timings.append([problem.name, method, i, secs])
    except LHSDError as exc:
        write_csv(os.path.join(out_dir, "records.csv"), RECORD_COLUMNS, records, h)
        _mark_partial(out_dir, str(exc))
        raise
    write_csv(os.path.join(out_dir, "records.csv"), RECORD_COLUMNS, records, h)
    write_csv(os.path.join(out_dir, "summary.csv"), ["dataset", "t", *cfg.methods],
              [[name, chosen[name], *(summary[name][m] for m in cfg.methods)]
               for name in summary], h)
    write_csv(os.path.join(out_dir, "timings.csv"),
              ["dataset", "method", "point_index", "seconds"], timings, h)
    return {"summary": summary, "t": chosen}


def run_diagnostics(cfg: ExperimentConfig):
    """Transition-mass curve, pooled spectra, filter profiles and the safe zone."""
    out_dir = cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    h = cfg.sha256()
    mass_rows, spec_rows, prof_rows, zone_rows = [], [], [], []
    zones = {}
    for dcfg in cfg.datasets:
        problem = build_problem(cfg, dcfg)
        curve, zone, t_sel = diagnose(problem, cfg)
        zones[problem.name] = (zone, t_sel, curve)
        for i, t in enumerate(curve.t_grid):
            spec = curve.spectra[i]
            inside = zone is not None and zone[0] <= t <= zone[1]
            mass_rows.append([problem.name, t, problem.field.kernel(t)[1], curve.kappas[i],
                              curve.masses[i], curve.collapsed[i], spec.lam_max, inside])
            for v, w in zip(spec.values, spec.weights):
                spec_rows.append([problem.name, t, spec.source, v, w])
            lam, resp = diag.filter_profile_table(cfg.filter, curve.kappas[i], spec)
            for a, b in zip(lam, resp):
                prof_rows.append([problem.name, t, a, b])
        if zone is None:
            zone_rows.append([problem.name, "NONE", "NONE", "NONE",
                              int(np.all(curve.collapsed))])
        else:
            zone_rows.append([problem.name, zone[0], zone[1], t_sel, 0])
    write_csv(os.path.join(out_dir, "transition_mass.csv"),
              ["dataset", "t", "sigma_sq", "kappa", "mass", "collapsed", "lam_max",
               "in_safe_zone"], mass_rows, h)
    write_csv(os.path.join(out_dir, "spectrum.csv"),
              ["dataset", "t", "source", "eigenvalue", "weight"], spec_rows, h)
    write_csv(os.path.join(out_dir, "filter_profile.csv"),
              ["dataset", "t", "lambda", "response"], prof_rows, h)
    write_csv(os.path.join(out_dir, "safe_zone.csv"),
              ["dataset", "t_lo", "t_hi", "t_selected", "all_collapsed"], zone_rows, h)
    return zones
