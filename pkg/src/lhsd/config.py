"""Experiment configuration: INI files with one section per concern.

Sections: ``[experiment]``, ``[schedule]``, ``[oracle]``, ``[filter]``,
``[slq]``, ``[time]``, ``[methods]`` and one or more ``[dataset]`` /
``[dataset:<name>]`` sections. See ``configs/`` for worked examples.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, LHSDError
from .schedule import NoiseSchedule
from .slq import SlqConfig
from .spectral_filter import FilterParams

METHODS = ("lhsd", "flipd", "flipd-hutch", "lidl", "nb", "lpca")
ORACLES = ("mixture", "affine", "perturbed")
GENERATORS = ("mixture", "moon", "funnel", "affine", "file")


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    generator: str
    params: dict = field(default_factory=dict)
    num_reference: int = 0
    num_eval: int | None = None
    idr_target_D: int | None = None
    idr_features: int = 32
    idr_clamp: bool = False


@dataclass(frozen=True)
class TimeConfig:
    t: float | None = None
    auto: bool = False
    grid: tuple = (0.01, 0.3, 16)
    diag_points: int = 20
    delta: float = 0.2
    delta_mode: str = "relative"
    m_safe: float = 0.005
    m_peak: float = 0.01

    def grid_values(self):
        lo, hi, n = self.grid
        return np.linspace(lo, hi, int(n))


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    datasets: tuple
    name: str = "experiment"
    output_dir: str = "out"
    jobs: int | None = None
    schedule: NoiseSchedule = NoiseSchedule()
    oracle: str = "mixture"
    epsilon: float = 0.01
    perturbation_seed: int = 0
    perturbation_mode: str = "diag-rademacher"
    perturbation_inner: str = "mixture"
    filter: FilterParams = FilterParams()
    slq: SlqConfig = SlqConfig()
    time: TimeConfig = TimeConfig()
    methods: tuple = ("lhsd",)
    hutch_K: int = 8
    lidl_L: int = 5
    nb_M: int | None = None
    nb_rank_rule: str = "gap"
    lpca_k: int = 20
    lenient: bool = False
    dense_limit: int = 1024

    def canonical(self):
        """Everything that affects results; output location and jobs excluded."""
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        d.pop("jobs")
        return json.dumps(d, sort_keys=True, default=str)

    def sha256(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def parse_grid(text):
    """``lo:hi:n`` to a tuple."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError as exc:
        raise ConfigError(f"bad t grid {text!r}; expected lo:hi:n") from exc
    if not (0 < lo < hi <= 1 and n >= 2):
        raise ConfigError(f"bad t grid {text!r}; need 0 < lo < hi <= 1 and n >= 2")
    return lo, hi, n


def _get(section, key, cast, default):
    if section is None or key not in section:
        return default
    raw = section[key].strip()
    if raw.lower() in ("", "none"):
        return None
    try:
        if cast is bool:
            return section.getboolean(key)
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key}: cannot parse {raw!r}") from exc


def _dataset_from_section(name, sec, base_dir):
    known = {"generator", "num_reference", "num_eval", "idr_target_d", "idr_features",
             "idr_clamp"}
    generator = _get(sec, "generator", str, None)
    if generator not in GENERATORS:
        raise ConfigError(f"[{sec.name}] generator must be one of {GENERATORS}")
    params = {k: v for k, v in sec.items() if k not in known}
    if generator == "file":
        if "path" not in params:
            raise ConfigError(f"[{sec.name}] file datasets need a path")
        path = params["path"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise ConfigError(f"[{sec.name}] dataset file not found: {path}")
        params["path"] = path
    return DatasetConfig(
        name=name,
        generator=generator,
        params=params,
        num_reference=_get(sec, "num_reference", int, 0) or 0,
        num_eval=_get(sec, "num_eval", int, None),
        idr_target_D=_get(sec, "idr_target_d", int, None),
        idr_features=_get(sec, "idr_features", int, 32),
        idr_clamp=_get(sec, "idr_clamp", bool, False),
    )


def load_config(path) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_parser(cp, os.path.dirname(os.path.abspath(path)))


def config_from_text(text, base_dir="."):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_parser(cp, base_dir)


def config_from_parser(cp, base_dir=".") -> ExperimentConfig:
    sec = lambda name: cp[name] if cp.has_section(name) else None  # noqa: E731
    exp = sec("experiment")
    seed = _get(exp, "seed", int, None)
    if seed is None:
        raise ConfigError("[experiment] seed is mandatory")
    datasets = []
    for name in cp.sections():
        if name == "dataset" or name.startswith("dataset:"):
            label = name.partition(":")[2] or cp[name].get("generator", "dataset")
            datasets.append(_dataset_from_section(label, cp[name], base_dir))
    try:
        sch = sec("schedule")
        schedule = NoiseSchedule(
            beta_min=_get(sch, "beta_min", float, 0.1),
            beta_max=_get(sch, "beta_max", float, 20.0),
            kind=_get(sch, "kind", str, "vp"),
        )
        flt = sec("filter")
        fp = FilterParams(c=_get(flt, "c", float, 0.1), p=_get(flt, "p", float, 4.0))
        sl = sec("slq")
        slq = SlqConfig(m=_get(sl, "m", int, 5), K=_get(sl, "k", int, 8), seed=seed,
                        reorthogonalize=_get(sl, "reorthogonalize", bool, True))
        tm = sec("time")
        grid = parse_grid(tm["grid"]) if tm is not None and "grid" in tm else (0.01, 0.3, 16)
        time = TimeConfig(
            t=_get(tm, "t", float, None),
            auto=_get(tm, "auto", bool, False),
            grid=grid,
            diag_points=_get(tm, "diag_points", int, 20),
            delta=_get(tm, "delta", float, 0.2),
            delta_mode=_get(tm, "delta_mode", str, "relative"),
            m_safe=_get(tm, "m_safe", float, 0.005),
            m_peak=_get(tm, "m_peak", float, 0.01),
        )
    except LHSDError as exc:
        raise ConfigError(str(exc)) from exc
    orc = sec("oracle")
    met = sec("methods")
    methods = tuple(m.strip() for m in (_get(met, "list", str, "lhsd") or "lhsd").split(","))
    cfg = ExperimentConfig(
        seed=seed,
        datasets=tuple(datasets),
        name=_get(exp, "name", str, "experiment"),
        output_dir=_resolve(_get(exp, "output_dir", str, "out"), base_dir),
        jobs=_get(exp, "jobs", int, None),
        schedule=schedule,
        oracle=_get(orc, "kind", str, "mixture"),
        epsilon=_get(orc, "epsilon", float, 0.01),
        perturbation_seed=_get(orc, "perturbation_seed", int, 0),
        perturbation_mode=_get(orc, "perturbation_mode", str, "diag-rademacher"),
        perturbation_inner=_get(orc, "inner", str, "mixture"),
        filter=fp,
        slq=slq,
        time=time,
        methods=methods,
        hutch_K=_get(met, "hutch_k", int, 8),
        lidl_L=_get(met, "lidl_l", int, 5),
        nb_M=_get(met, "nb_m", int, None),
        nb_rank_rule=_get(met, "nb_rank_rule", str, "gap"),
        lpca_k=_get(met, "lpca_k", int, 20),
        lenient=_get(exp, "lenient", bool, False),
        dense_limit=_get(exp, "dense_limit", int, 1024),
    )
    validate(cfg)
    return cfg


def _resolve(path, base_dir):
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


def validate(cfg: ExperimentConfig):
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    bad = [m for m in cfg.methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
    if cfg.oracle not in ORACLES:
        raise ConfigError(f"oracle must be one of {ORACLES}")
    if cfg.perturbation_inner not in ("mixture", "affine"):
        raise ConfigError("perturbed oracle wraps mixture or affine")
    if cfg.nb_rank_rule not in ("gap", "threshold"):
        raise ConfigError("nb rank rule must be gap or threshold")
    if cfg.time.delta_mode not in ("relative", "absolute"):
        raise ConfigError("delta_mode must be relative or absolute")
    if cfg.time.t is not None and not 0 < cfg.time.t <= 1:
        raise ConfigError("t must lie in (0, 1]")
    if cfg.jobs is not None and cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    return cfg
