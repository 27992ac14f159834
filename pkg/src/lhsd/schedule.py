"""Variance-preserving noise schedule.

All downstream formulas consume ``(mu, sigma_sq)`` rather than ``t`` so the
VP kernel and the unscaled Gaussian convolution share one interface.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

VP = "vp"
IDENTITY_MEAN = "identity"


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear-beta VP-SDE schedule on ``t in [0, 1]``.

    With ``kind="identity"`` the kernel mean is not scaled (``mu = 1``) while
    ``sigma_sq`` follows the same closed form.
    """

    beta_min: float = 0.1
    beta_max: float = 20.0
    kind: str = VP

    def __post_init__(self):
        if not (self.beta_max > self.beta_min > 0):
            raise DomainError(
                f"need beta_max > beta_min > 0, got {self.beta_min}, {self.beta_max}"
            )
        if self.kind not in (VP, IDENTITY_MEAN):
            raise DomainError(f"unknown schedule kind {self.kind!r}")

    def _check(self, t):
        if not (0.0 <= t <= 1.0) or math.isnan(t):
            raise DomainError(f"t must lie in [0, 1], got {t}")

    def beta(self, t: float) -> float:
        self._check(t)
        return self.beta_min + t * (self.beta_max - self.beta_min)

    def integrated_beta(self, t: float) -> float:
        """Integral of beta from 0 to t."""
        self._check(t)
        return self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t

    def mu_sigma(self, t: float) -> tuple[float, float]:
        """Return ``(mu, sigma_sq)`` of the transition kernel at time ``t``."""
        b = self.integrated_beta(t)
        # expm1 keeps sigma_sq accurate for tiny t
        sigma_sq = -math.expm1(-b)
        mu = 1.0 if self.kind == IDENTITY_MEAN else math.exp(-0.5 * b)
        return mu, sigma_sq

    def mu(self, t: float) -> float:
        return self.mu_sigma(t)[0]

    def sigma_sq(self, t: float) -> float:
        return self.mu_sigma(t)[1]

    def t_from_sigma_sq(self, sigma_sq: float) -> float:
        """Invert ``sigma_sq(t)``; the inverse exists for ``0 <= sigma_sq < 1``."""
        if not (0.0 <= sigma_sq < 1.0):
            raise DomainError(f"sigma_sq must lie in [0, 1), got {sigma_sq}")
        target = -math.log1p(-sigma_sq)
        a = 0.5 * (self.beta_max - self.beta_min)
        b = self.beta_min
        # positive root of a t^2 + b t - target = 0, written to avoid cancellation
        t = 2.0 * target / (b + math.sqrt(b * b + 4.0 * a * target))
        if t > 1.0:
            raise DomainError(f"sigma_sq={sigma_sq} is not reached for t <= 1")
        return t
