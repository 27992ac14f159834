"""Spectrum summaries and the transition-mass diagnostic for choosing ``t``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .slq import (SlqConfig, dense_sym_eigen, lanczos, probe_rng, rademacher_probe,
                  tridiag_eigen)
from .spectral_filter import FilterParams, apply, cutoff, profile

DENSE = "dense"
RITZ = "ritz"
ABSOLUTE = "absolute"
RELATIVE = "relative"


@dataclass
class SpectrumSummary:
    """Pooled eigenvalues (unit weights) or Ritz nodes (weights ``tau^2 ||v||^2``).

    Dense weights sum to ``D`` per point, Ritz weights to ``D`` per probe.
    ``collapsed`` holds the per-point collapse flags.
    """

    values: np.ndarray
    weights: np.ndarray
    source: str
    t: float
    kappa: float
    dim: int
    num_points: int = 1
    collapsed: np.ndarray | None = None

    @property
    def lam_max(self):
        return float(np.max(np.abs(self.values)))


@dataclass
class TransitionMassCurve:
    t_grid: np.ndarray
    masses: np.ndarray
    kappas: np.ndarray
    delta: float = 0.2
    delta_mode: str = RELATIVE
    spectra: list = field(default_factory=list)
    collapsed: np.ndarray | None = None


def dense_spectrum(score_field, x, t, dense_limit=1024):
    hess = score_field.dense_hessian(x, t, dense_limit=dense_limit)
    return dense_sym_eigen(hess, dense_limit=dense_limit)[0]


def ritz_spectrum(score_field, x, t, slq_config, point_index=0):
    """Ritz nodes and weights ``tau_j^2 ||v||^2`` pooled over ``K`` probes."""
    oracle = score_field.local(x, t)
    nodes, weights = [], []
    for k in range(slq_config.K):
        v = rademacher_probe(oracle.dim, probe_rng(slq_config.seed, point_index, k))
        factor = lanczos(oracle, v, slq_config.m, slq_config.reorthogonalize)
        rule = tridiag_eigen(factor)
        nodes.append(rule.nodes)
        weights.append(rule.weights * factor.probe_norm_sq)
    return np.concatenate(nodes), np.concatenate(weights)


def collect_spectrum(score_field, points, t, filter_params=None, slq_config=None,
                     source=None, dense_limit=1024) -> SpectrumSummary:
    """Pool the Hessian spectrum over ``points`` at time ``t``.

    ``source`` defaults to dense when ``D <= dense_limit`` and Ritz otherwise.
    """
    fp = filter_params or FilterParams()
    cfg = slq_config or SlqConfig()
    points = np.atleast_2d(points)
    dim = score_field.dim
    if source is None:
        source = DENSE if dim <= dense_limit else RITZ
    values, weights, collapsed = [], [], []
    for i, x in enumerate(points):
        if source == DENSE:
            ev = dense_spectrum(score_field, x, t, dense_limit)
            values.append(ev)
            weights.append(np.ones_like(ev))
        elif source == RITZ:
            nodes, w = ritz_spectrum(score_field, x, t, cfg, point_index=i)
            values.append(nodes)
            weights.append(w)
        else:
            raise DomainError(f"unknown spectrum source {source!r}")
        collapsed.append(collapse_flag(values[-1]))
    _, sigma_sq = score_field.kernel(t)
    return SpectrumSummary(np.concatenate(values), np.concatenate(weights), source, t,
                           cutoff(fp, sigma_sq), dim, len(points), np.array(collapsed))


def band(kappa, delta=0.2, delta_mode=RELATIVE):
    if delta_mode == ABSOLUTE:
        return kappa - delta, kappa + delta
    if delta_mode == RELATIVE:
        return kappa / (1.0 + delta), kappa * (1.0 + delta)
    raise DomainError(f"unknown delta mode {delta_mode!r}")


def transition_mass(spectrum, kappa=None, delta=0.2, delta_mode=RELATIVE):
    """Weighted fraction of eigenvalue magnitudes inside the band around ``kappa``.

    ``spectrum`` is a :class:`SpectrumSummary` or a plain array of eigenvalues.
    """
    if isinstance(spectrum, SpectrumSummary):
        values, weights = spectrum.values, spectrum.weights
        kappa = spectrum.kappa if kappa is None else kappa
    else:
        values = np.asarray(spectrum, dtype=float).ravel()
        weights = np.ones_like(values)
    if values.size == 0:
        raise DomainError("empty spectrum")
    lo, hi = band(kappa, delta, delta_mode)
    mag = np.abs(values)
    inside = (mag >= lo) & (mag <= hi)
    return float(np.sum(weights[inside]) / np.sum(weights))


def collapse_flag(eigenvalues, gap_ratio_min=10.0):
    """True when no multiplicative gap of at least ``gap_ratio_min`` separates the
    positive eigenvalues (values <= 1e-9 are ignored)."""
    if isinstance(eigenvalues, SpectrumSummary):
        eigenvalues = eigenvalues.values
    ev = np.sort(np.asarray(eigenvalues, dtype=float).ravel())
    ev = ev[ev > 1e-9]
    if ev.size < 2:
        return True
    return bool(np.max(ev[1:] / ev[:-1]) < gap_ratio_min)


def sweep(score_field, points, t_grid, filter_params=None, slq_config=None, delta=0.2,
          delta_mode=RELATIVE, source=None, dense_limit=1024, clean=True):
    """Spectra and transition mass at every ``t`` of an ascending grid.

    With ``clean`` set, ``points`` are data points and are moved to
    ``mu(t) x`` at each grid time; otherwise they are used as given.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise DomainError("t grid must be strictly ascending")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    spectra = []
    for t in t_grid:
        mu = score_field.kernel(t)[0] if clean else 1.0
        spectra.append(collect_spectrum(score_field, mu * points, t, filter_params,
                                        slq_config, source, dense_limit))
    masses = np.array([transition_mass(s, None, delta, delta_mode) for s in spectra])
    # a grid point counts as collapsed when most sampled points are
    collapsed = np.array([np.mean(s.collapsed) > 0.5 for s in spectra])
    return TransitionMassCurve(t_grid, masses, np.array([s.kappa for s in spectra]),
                               delta, delta_mode, spectra, collapsed)


def _runs(mask):
    runs, start = [], None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def safe_zone(curve: TransitionMassCurve, spectra_by_t=None, filter_params=None,
              m_safe=0.005, m_peak=0.01, min_points=3):
    """Longest run of ``M(t) <= m_safe`` in the first valley of the curve.

    The valley lies between the first and second peaks (``M > m_peak``); when
    the curve rises only once, it is the stretch preceding that peak. Every
    ``t`` in the run must also keep the cutoff below the largest eigenvalue
    (``f(lambda_max) < 0.5``) so the overshoot regime is excluded; this check
    is skipped when no spectra are available. Returns ``(t_lo, t_hi)`` or
    ``None``.
    """
    masses = np.asarray(curve.masses, dtype=float)
    t_grid = np.asarray(curve.t_grid, dtype=float)
    if masses.size < min_points:
        raise DomainError(f"safe-zone detection needs >= {min_points} grid points")
    fp = filter_params or FilterParams()
    spectra = curve.spectra if spectra_by_t is None else spectra_by_t
    guard = np.ones(masses.size, dtype=bool)
    if spectra:
        for i, spec in enumerate(spectra):
            lam_max = spec.lam_max if isinstance(spec, SpectrumSummary) else float(
                np.max(np.abs(spec)))
            guard[i] = apply(fp, lam_max, curve.kappas[i]) < 0.5
    peaks = _runs(masses > m_peak)
    if not peaks:
        return None
    if len(peaks) >= 2:
        lo, hi = peaks[0][1] + 1, peaks[1][0] - 1
    else:
        lo, hi = 0, peaks[0][0] - 1
    if hi < lo:
        return None
    ok = np.zeros(masses.size, dtype=bool)
    ok[lo:hi + 1] = (masses[lo:hi + 1] <= m_safe) & guard[lo:hi + 1]
    runs = _runs(ok)
    if not runs:
        return None
    a, b = max(runs, key=lambda r: (r[1] - r[0], -r[0]))
    return float(t_grid[a]), float(t_grid[b])


def select_t(zone, t_grid):
    """Middle grid point of a safe zone."""
    if zone is None:
        return None
    t_grid = np.asarray(t_grid, dtype=float)
    inside = t_grid[(t_grid >= zone[0]) & (t_grid <= zone[1])]
    return float(inside[len(inside) // 2])


def filter_profile_table(filter_params, kappa, spectrum=None, num=200):
    """(lambda, f(lambda)) on a log grid spanning the spectrum and the cutoff."""
    if spectrum is not None and np.any(np.abs(spectrum.values) > 1e-12):
        mags = np.abs(spectrum.values)
        mags = mags[mags > 1e-12]
        lo, hi = min(mags.min(), kappa) / 10, max(mags.max(), kappa) * 10
    else:
        lo, hi = kappa / 1e3, kappa * 1e3
    return profile(filter_params, kappa, lo, hi, num)
