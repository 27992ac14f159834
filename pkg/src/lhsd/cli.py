"""``lhsd`` command line: generate-data, estimate, spectrum, transition-mass, benchmark.

Exit codes: 0 success, 1 estimation error, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys

from . import diagnostics as diag
from .config import (METHODS, DatasetConfig, ExperimentConfig, TimeConfig, load_config,
                     parse_grid, validate)
from .errors import ConfigError, LHSDError
from .io import fmt_value, write_csv, write_dataset
from .runner import (RECORD_COLUMNS, build_problem, diagnostic_points, make_dataset,
                     map_points, resolve_jobs, resolve_t, run_benchmark, run_diagnostics)
from .schedule import NoiseSchedule
from .slq import SlqConfig
from .spectral_filter import FilterParams

log = logging.getLogger("lhsd")

EXIT_OK, EXIT_ESTIMATION, EXIT_CONFIG = 0, 1, 2


def _common(p):
    g = p.add_argument_group("experiment")
    g.add_argument("--config", help="INI experiment config")
    g.add_argument("--data", help="dataset file (overrides the config datasets)")
    g.add_argument("--num-reference", type=int, default=None,
                   help="leading rows of --data used as the mixture reference set")
    g.add_argument("--affine", metavar="D:d:N",
                   help="use an affine Gaussian dataset and oracle instead of --data")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--jobs", type=int, default=None)
    g.add_argument("--out", help="output file (estimate) or directory")
    g.add_argument("--lenient", action="store_true", default=None)
    g.add_argument("-v", "--verbose", action="store_true")
    s = p.add_argument_group("schedule")
    s.add_argument("--beta-min", type=float)
    s.add_argument("--beta-max", type=float)
    s.add_argument("--schedule", choices=["vp", "identity"])
    o = p.add_argument_group("oracle")
    o.add_argument("--oracle", choices=["mixture", "affine", "perturbed"])
    o.add_argument("--epsilon", type=float)
    o.add_argument("--perturbation-seed", type=int)
    o.add_argument("--perturbation-mode", choices=["diag-rademacher", "gaussian-sym"])
    f = p.add_argument_group("filter and SLQ")
    f.add_argument("--filter-c", type=float)
    f.add_argument("--filter-p", type=float)
    f.add_argument("--slq-m", type=int)
    f.add_argument("--slq-k", type=int)
    f.add_argument("--no-reorth", action="store_true")
    t = p.add_argument_group("time")
    t.add_argument("--t", type=float)
    t.add_argument("--t-auto", action="store_true")
    t.add_argument("--t-grid", metavar="LO:HI:N")
    t.add_argument("--diag-points", type=int)
    t.add_argument("--delta", type=float)
    t.add_argument("--delta-mode", choices=["relative", "absolute"])
    m = p.add_argument_group("methods")
    m.add_argument("--method", action="append", choices=METHODS,
                   help="repeatable; defaults to the config list or lhsd")
    m.add_argument("--hutch-k", type=int)
    m.add_argument("--lidl-L", type=int)
    m.add_argument("--nb-M", type=int)
    m.add_argument("--nb-rank-rule", choices=["gap", "threshold"])
    m.add_argument("--lpca-k", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="lhsd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    gen = sub.add_parser("generate-data", help="write a dataset file from a config")
    gen.add_argument("--spec", required=True, help="config with a [dataset] section")
    gen.add_argument("--out", required=True)
    gen.add_argument("--dataset", help="dataset name when the config has several")
    gen.add_argument("-v", "--verbose", action="store_true")
    for name, text in (("estimate", "per-point LID estimates as CSV"),
                       ("spectrum", "pooled Hessian spectrum at one t"),
                       ("transition-mass", "M(t) curve and safe zone over a t grid"),
                       ("benchmark", "methods x datasets MAE table")):
        _common(sub.add_parser(name, help=text))
    return parser


def _base_config(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig(seed=0, datasets=())
    if args.data or args.affine:
        if args.affine:
            try:
                dim, d, n = (int(v) for v in args.affine.split(":"))
            except ValueError as exc:
                raise ConfigError("--affine expects D:d:N") from exc
            dcfg = DatasetConfig("affine", "affine",
                                 {"dim": str(dim), "intrinsic_dim": str(d), "n": str(n)})
            if args.oracle is None:
                cfg = dataclasses.replace(cfg, oracle="affine")
            elif args.oracle == "perturbed":
                cfg = dataclasses.replace(cfg, perturbation_inner="affine")
        else:
            if not os.path.exists(args.data):
                raise ConfigError(f"dataset file not found: {args.data}")
            name = os.path.splitext(os.path.basename(args.data))[0]
            dcfg = DatasetConfig(name, "file", {"path": args.data},
                                 num_reference=args.num_reference or 0)
        cfg = dataclasses.replace(cfg, datasets=(dcfg,))
    return cfg


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    def pick(value, current):
        return current if value is None else value

    seed = pick(args.seed, cfg.seed)
    try:
        schedule = NoiseSchedule(pick(args.beta_min, cfg.schedule.beta_min),
                                 pick(args.beta_max, cfg.schedule.beta_max),
                                 pick(args.schedule, cfg.schedule.kind))
        fp = FilterParams(pick(args.filter_c, cfg.filter.c), pick(args.filter_p, cfg.filter.p))
        slq = SlqConfig(m=pick(args.slq_m, cfg.slq.m), K=pick(args.slq_k, cfg.slq.K),
                        seed=seed,
                        reorthogonalize=cfg.slq.reorthogonalize and not args.no_reorth)
    except LHSDError as exc:
        raise ConfigError(str(exc)) from exc
    tc = cfg.time
    time = TimeConfig(
        t=pick(args.t, tc.t),
        auto=tc.auto or args.t_auto,
        grid=parse_grid(args.t_grid) if args.t_grid else tc.grid,
        diag_points=pick(args.diag_points, tc.diag_points),
        delta=pick(args.delta, tc.delta),
        delta_mode=pick(args.delta_mode, tc.delta_mode),
        m_safe=tc.m_safe,
        m_peak=tc.m_peak,
    )
    if args.t is not None and args.t_auto:
        raise ConfigError("--t and --t-auto are mutually exclusive")
    if args.t is not None:
        time = dataclasses.replace(time, auto=False)
    cfg = dataclasses.replace(
        cfg,
        seed=seed,
        schedule=schedule,
        filter=fp,
        slq=slq,
        time=time,
        oracle=pick(args.oracle, cfg.oracle),
        epsilon=pick(args.epsilon, cfg.epsilon),
        perturbation_seed=pick(args.perturbation_seed, cfg.perturbation_seed),
        perturbation_mode=pick(args.perturbation_mode, cfg.perturbation_mode),
        methods=tuple(args.method) if args.method else cfg.methods,
        hutch_K=pick(args.hutch_k, cfg.hutch_K),
        lidl_L=pick(args.lidl_L, cfg.lidl_L),
        nb_M=pick(args.nb_M, cfg.nb_M),
        nb_rank_rule=pick(args.nb_rank_rule, cfg.nb_rank_rule),
        lpca_k=pick(args.lpca_k, cfg.lpca_k),
        lenient=pick(args.lenient, cfg.lenient),
        jobs=pick(args.jobs, cfg.jobs),
        output_dir=pick(args.out, cfg.output_dir),
    )
    if not cfg.datasets:
        raise ConfigError("no dataset: pass --config, --data or --affine")
    return validate(cfg)


def cmd_generate(args):
    cfg = load_config(args.spec)
    dsets = cfg.datasets
    if args.dataset:
        dsets = tuple(d for d in dsets if d.name == args.dataset)
    if len(dsets) != 1:
        raise ConfigError("config must name exactly one dataset (use --dataset)")
    ds, _ = make_dataset(dsets[0], cfg.seed, cfg.schedule)
    write_dataset(args.out, ds)
    log.info("wrote %d points (D=%d) to %s", len(ds), ds.dim, args.out)


def cmd_estimate(cfg: ExperimentConfig, args):
    jobs = resolve_jobs(cfg.jobs)
    rows = []
    h = cfg.sha256()
    for dcfg in cfg.datasets:
        problem = build_problem(cfg, dcfg)
        t = resolve_t(problem, cfg)
        for method in cfg.methods:
            for i, r, err, _ in map_points(method, problem, t, cfg, jobs):
                if err is not None:
                    raise LHSDError(f"[{problem.name}/{method}] point {i} failed: {err}")
                rows.append([problem.name, method, i, t, r["estimate"], problem.gt_lid[i],
                             problem.component_id[i], r["hvp_calls"], r["truncated_probes"],
                             r["failed_probes"], r["probe_std"], problem.n_ref])
    if args.out and args.out != "-":
        write_csv(args.out, RECORD_COLUMNS, rows, h)
    else:
        sys.stdout.write(f"# config_sha256={h}\n")
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for row in rows:
            w.writerow([fmt_value(v) for v in row])


def cmd_spectrum(cfg: ExperimentConfig, args):
    os.makedirs(cfg.output_dir, exist_ok=True)
    h = cfg.sha256()
    spec_rows, prof_rows = [], []
    for dcfg in cfg.datasets:
        problem = build_problem(cfg, dcfg)
        t = resolve_t(problem, cfg)
        pts = diagnostic_points(problem, cfg.time.diag_points, cfg.seed)
        mu, _ = problem.field.kernel(t)
        spec = diag.collect_spectrum(problem.field, mu * pts, t, cfg.filter, cfg.slq,
                                     None, cfg.dense_limit)
        for v, w in zip(spec.values, spec.weights):
            spec_rows.append([problem.name, t, spec.source, v, w])
        lam, resp = diag.filter_profile_table(cfg.filter, spec.kappa, spec)
        prof_rows.extend([problem.name, t, a, b] for a, b in zip(lam, resp))
        log.info("[%s] t=%g kappa=%g M=%.4f", problem.name, t, spec.kappa,
                 diag.transition_mass(spec, None, cfg.time.delta, cfg.time.delta_mode))
    write_csv(os.path.join(cfg.output_dir, "spectrum.csv"),
              ["dataset", "t", "source", "eigenvalue", "weight"], spec_rows, h)
    write_csv(os.path.join(cfg.output_dir, "filter_profile.csv"),
              ["dataset", "t", "lambda", "response"], prof_rows, h)


def cmd_transition_mass(cfg: ExperimentConfig, args):
    zones = run_diagnostics(cfg)
    for name, (zone, t_sel, _) in zones.items():
        if zone is None:
            print(f"{name}: safe zone NONE")
        else:
            print(f"{name}: safe zone [{zone[0]:.6g}, {zone[1]:.6g}], selected t={t_sel:.6g}")


def cmd_benchmark(cfg: ExperimentConfig, args):
    result = run_benchmark(cfg)
    for name, row in result["summary"].items():
        cells = "  ".join(f"{m}={v:.4f}" for m, v in row.items())
        print(f"{name} (t={result['t'][name]:.6g}): {cells}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate-data":
            cmd_generate(args)
            return EXIT_OK
        cfg = apply_overrides(_base_config(args), args)
        {"estimate": cmd_estimate, "spectrum": cmd_spectrum,
         "transition-mass": cmd_transition_mass,
         "benchmark": cmd_benchmark}[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LHSDError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
