"""Hill-type low-pass filter on Hessian eigenvalues."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class FilterParams:
    """Cutoff coefficient ``c`` and steepness ``p`` of the Hill filter."""

    c: float = 0.1
    p: float = 4.0

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"filter c must be positive, got {self.c}")
        if not self.p >= 1:
            raise DomainError(f"filter p must be >= 1, got {self.p}")

    def cutoff(self, sigma_sq):
        return cutoff(self, sigma_sq)

    def response(self, lam, kappa):
        return apply(self, lam, kappa)


def cutoff(params: FilterParams, sigma_sq: float) -> float:
    """Noise-adaptive cutoff ``kappa = c / sigma^2``."""
    if not sigma_sq > 0:
        raise DomainError(f"sigma_sq must be positive, got {sigma_sq}")
    return params.c / sigma_sq


def apply(params: FilterParams, lam, kappa):
    """Evaluate ``1 / (1 + (|lam| / kappa)^p)`` elementwise.

    Negative eigenvalues are folded by absolute value, never clamped.
    """
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    ratio = np.abs(np.asarray(lam, dtype=float)) / kappa
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + ratio ** params.p)
    return out if out.ndim else float(out)


def hill(params: FilterParams, kappa: float):
    """Return the filter as a one-argument callable for quadrature."""
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    return lambda lam: apply(params, lam, kappa)


def profile(params: FilterParams, kappa: float, lam_min: float, lam_max: float, num=200):
    """Filter response sampled on a log-spaced eigenvalue grid (for overlays)."""
    lo = max(lam_min, 1e-12)
    hi = max(lam_max, lo * 10)
    grid = np.geomspace(lo, hi, num)
    return grid, apply(params, grid, kappa)
