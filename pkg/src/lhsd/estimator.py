"""Local Hessian spectral dimension: ``tr f(H)`` with the Hill filter."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, LHSDError
from .slq import (SlqConfig, lanczos, probe_rng, quadrature, rademacher_probe,
                  tridiag_eigen, dense_sym_eigen)
from .spectral_filter import FilterParams, apply, cutoff, hill


@dataclass
class EstimateRecord:
    point_index: int
    t: float
    estimate: float
    per_probe: np.ndarray
    hvp_calls: int
    method: str = "lhsd"
    params: dict = field(default_factory=dict)
    truncated_probes: int = 0
    failed_probes: int = 0


def lhsd_estimate(score_field, x, t, filter_params=None, slq_config=None,
                  point_index=0, lenient=False) -> EstimateRecord:
    """Stochastic estimate of the local intrinsic dimension at ``x``.

    Each probe runs ``m`` Lanczos steps on the Hessian oracle at ``(x, t)``
    and evaluates the filtered Gauss quadrature; the estimate is the probe
    mean. A failing probe aborts the point unless ``lenient`` is set, in
    which case it is recorded as NaN and excluded from the mean.
    """
    fp = filter_params or FilterParams()
    cfg = slq_config or SlqConfig()
    oracle = score_field.local(x, t)
    if cfg.m > oracle.dim:
        raise DomainError(f"m={cfg.m} exceeds D={oracle.dim}")
    kappa = cutoff(fp, oracle.sigma_sq)
    f = hill(fp, kappa)
    per_probe = np.empty(cfg.K)
    truncated = failed = 0
    for k in range(cfg.K):
        v = rademacher_probe(oracle.dim, probe_rng(cfg.seed, point_index, k))
        try:
            factor = lanczos(oracle, v, cfg.m, cfg.reorthogonalize)
            per_probe[k] = quadrature(tridiag_eigen(factor), f, factor.probe_norm_sq)
            truncated += factor.truncated
        except LHSDError:
            if not lenient:
                raise
            per_probe[k] = np.nan
            failed += 1
    if failed == cfg.K:
        raise LHSDError(f"all probes failed at point {point_index}")
    return EstimateRecord(
        point_index=point_index,
        t=t,
        estimate=float(np.nanmean(per_probe)),
        per_probe=per_probe,
        hvp_calls=oracle.hvp_calls,
        method="lhsd",
        params={"c": fp.c, "p": fp.p, "m": cfg.m, "K": cfg.K, "seed": cfg.seed},
        truncated_probes=truncated,
        failed_probes=failed,
    )


def filtered_count(eigenvalues, kappa, filter_params=None):
    """``sum_i f(lambda_i)`` for a known spectrum."""
    fp = filter_params or FilterParams()
    return float(np.sum(apply(fp, np.asarray(eigenvalues), kappa)))


def lhsd_exact(score_field, x, t, filter_params=None, dense_limit=1024):
    """Dense reference: assemble ``H``, diagonalize, sum the filtered spectrum."""
    fp = filter_params or FilterParams()
    hess = score_field.dense_hessian(x, t, dense_limit=dense_limit)
    eigenvalues, _ = dense_sym_eigen(hess, dense_limit=dense_limit)
    _, sigma_sq = score_field.kernel(t)
    return filtered_count(eigenvalues, cutoff(fp, sigma_sq), fp)
