"""Reference LID estimators built on the same score oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DomainError
from .estimator import EstimateRecord
from .slq import probe_rng, rademacher_probe

GAP = "gap"
THRESHOLD = "threshold"


def flipd(score_field, x, t):
    """``D + sigma^2 (div s + ||s||^2)`` with the exact divergence.

    Values below zero are returned unchanged; callers flag them.
    """
    oracle = score_field.local(x, t)
    s = oracle.score()
    return oracle.dim + oracle.sigma_sq * (oracle.divergence() + float(s @ s))


def flipd_hutch(score_field, x, t, K=8, seed=0, point_index=0) -> EstimateRecord:
    """FLIPD with the divergence replaced by ``-(1/K) sum_k v_k^T H v_k``."""
    if K < 1:
        raise DomainError("K must be >= 1")
    oracle = score_field.local(x, t)
    s = oracle.score()
    base = oracle.dim + oracle.sigma_sq * float(s @ s)
    per_probe = np.empty(K)
    for k in range(K):
        v = rademacher_probe(oracle.dim, probe_rng(seed, point_index, k))
        per_probe[k] = base - oracle.sigma_sq * float(v @ oracle.hvp(v))
    return EstimateRecord(point_index, t, float(per_probe.mean()), per_probe,
                          oracle.hvp_calls, "flipd-hutch", {"K": K, "seed": seed})


def lidl_grid(schedule, t, num_scales=5):
    """Times whose noise levels are geometric between ``sigma(t)/2`` and ``2 sigma(t)``.

    The upper end is capped at the largest noise level the schedule reaches.
    """
    sigma = math.sqrt(schedule.sigma_sq(t))
    top = min(2.0 * sigma, math.sqrt(schedule.sigma_sq(1.0)))
    sigmas = np.geomspace(0.5 * sigma, top, num_scales)
    return np.array([schedule.t_from_sigma_sq(min(s * s, schedule.sigma_sq(1.0)))
                     for s in sigmas])


def lidl(score_field, x, t, num_scales=5, t_grid=None):
    """``D +`` least-squares slope of ``log p`` against ``log sigma``.

    ``x`` is given at time ``t``; for each grid time ``t_i`` it is rescaled by
    ``mu(t_i) / mu(t)`` so that it stays on the same diffused trajectory.
    """
    schedule = score_field.schedule
    if t_grid is None:
        if num_scales < 2:
            raise DomainError("LIDL needs at least two noise scales")
        t_grid = lidl_grid(schedule, t, num_scales)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 2:
        raise DomainError("LIDL needs at least two noise scales")
    x = np.asarray(x, dtype=float)
    mu_ref = schedule.mu(t)
    log_sigma, log_p = [], []
    for ti in t_grid:
        mu_i, s2_i = score_field.kernel(ti)
        log_sigma.append(0.5 * math.log(s2_i))
        log_p.append(score_field.log_density(x * (mu_i / mu_ref), ti))
    log_sigma = np.array(log_sigma)
    if np.ptp(log_sigma) < 1e-12:
        raise DomainError("LIDL grid has no spread in sigma")
    slope = np.polyfit(log_sigma, np.array(log_p), 1)[0]
    return score_field.dim + float(slope)


@dataclass(frozen=True)
class NbConfig:
    """Normal-bundle settings. ``num_scores=None`` means ``4 D``."""

    num_scores: int | None = None
    rank_rule: str = GAP
    threshold_rel: float = 0.05
    gap_min_ratio: float = 5.0
    center: bool = True
    svd_limit: int = 1024

    def __post_init__(self):
        if self.rank_rule not in (GAP, THRESHOLD):
            raise DomainError(f"unknown rank rule {self.rank_rule!r}")
        if not 0 < self.threshold_rel < 1:
            raise DomainError("threshold_rel must lie in (0, 1)")


@dataclass
class NbResult:
    estimate: int
    rank: int
    rule: str
    singular_values: np.ndarray


def numerical_rank(singular_values, rule=GAP, threshold_rel=0.05, gap_min_ratio=5.0):
    """Rank by largest consecutive ratio, or by a relative threshold.

    The gap rule falls back to the threshold rule when no ratio reaches
    ``gap_min_ratio``. Returns ``(rank, rule_used)``.
    """
    sv = np.sort(np.asarray(singular_values, dtype=float))[::-1]
    if sv.size == 0 or sv[0] <= 0:
        return 0, rule
    if rule == GAP and sv.size > 1:
        tiny = sv[0] * 1e-13
        with np.errstate(divide="ignore"):
            ratios = np.where(sv[1:] > tiny, sv[:-1] / np.maximum(sv[1:], tiny), np.inf)
        best = int(np.argmax(ratios))
        if ratios[best] >= gap_min_ratio:
            return best + 1, GAP
    return int(np.sum(sv > threshold_rel * sv[0])), THRESHOLD


def nb_details(score_field, x, t, config=None, seed=0, point_index=0) -> NbResult:
    cfg = config or NbConfig()
    dim = score_field.dim
    if dim > cfg.svd_limit:
        raise CapacityError(f"D={dim} exceeds SVD limit {cfg.svd_limit}")
    num = cfg.num_scores or 4 * dim
    x = np.asarray(x, dtype=float)
    _, sigma_sq = score_field.kernel(t)
    sigma = math.sqrt(sigma_sq)
    scores = np.empty((dim, num))
    for k in range(num):
        xi = probe_rng(seed, point_index, k).standard_normal(dim)
        scores[:, k] = score_field.score(x + sigma * xi, t)
    if cfg.center:
        scores -= scores.mean(axis=1, keepdims=True)
    sv = np.linalg.svd(scores, compute_uv=False)
    rank, rule = numerical_rank(sv, cfg.rank_rule, cfg.threshold_rel, cfg.gap_min_ratio)
    return NbResult(dim - rank, rank, rule, sv)


def nb(score_field, x, t, config=None, seed=0, point_index=0) -> int:
    """``D - rank`` of the matrix of scores at ``M`` noisy copies of ``x``.

    ``x`` is the query at time ``t``; copies are ``x + sigma(t) xi``.
    """
    return nb_details(score_field, x, t, config, seed, point_index).estimate


def lpca(points, x, k_neighbors, variance_threshold=0.95):
    """Local PCA: smallest rank reaching ``variance_threshold`` of the variance
    of the ``k`` nearest dataset points to ``x``."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if not 2 <= k_neighbors <= n - 1:
        raise DomainError(f"need 2 <= k <= N-1, got k={k_neighbors}, N={n}")
    dist = np.sum((points - np.asarray(x, dtype=float)) ** 2, axis=1)
    idx = np.argpartition(dist, k_neighbors - 1)[:k_neighbors]
    nbrs = points[idx] - points[idx].mean(axis=0)
    var = np.linalg.svd(nbrs, compute_uv=False) ** 2
    total = var.sum()
    if total <= 1e-24 * max(1.0, float(np.sum(points[idx] ** 2))):
        return 0
    cum = np.cumsum(var) / total
    return int(np.searchsorted(cum, variance_threshold - 1e-12) + 1)
