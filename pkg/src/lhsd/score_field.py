"""Closed-form score oracles for Gaussian-smoothed distributions.

Every field exposes the score ``s = grad log p_t``, the log-density, the
divergence of the score and Hessian-vector products with ``H = -hess log p_t``.
Evaluation at a fixed ``(x, t)`` goes through :meth:`ScoreField.local`, which
precomputes everything that depends only on ``(x, t)`` so that repeated HVP
calls (as issued by Lanczos) are cheap.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError, DomainError
from .schedule import NoiseSchedule

# relative mixture weights below exp(-PRUNE_NATS) are dropped from HVPs
PRUNE_NATS = 50.0
DENSE_LIMIT = 1024


def _as_point(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise DomainError(f"expected a point of shape ({dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("point has non-finite entries")
    return x


class LocalOracle:
    """Oracle frozen at one ``(x, t)``; calling it applies the Hessian."""

    def __init__(self, x, t, mu, sigma_sq):
        self.x = x
        self.t = t
        self.mu = mu
        self.sigma_sq = sigma_sq
        self.dim = x.shape[0]
        self.hvp_calls = 0

    def __call__(self, v):
        return self.hvp(v)

    def hvp(self, v):
        v = np.asarray(v, dtype=float)
        self.hvp_calls += 1
        return self._hvp(v)

    def _hvp(self, v):
        raise NotImplementedError

    def score(self):
        raise NotImplementedError

    def log_density(self):
        raise NotImplementedError

    def divergence(self):
        raise NotImplementedError


class ScoreField:
    """Base class: subclasses implement :meth:`_local`."""

    dim: int
    schedule: NoiseSchedule

    def kernel(self, t):
        mu, sigma_sq = self.schedule.mu_sigma(t)
        if sigma_sq <= 0.0:
            raise DomainError("sigma(t) = 0; oracles need t > 0")
        return mu, sigma_sq

    def local(self, x, t) -> LocalOracle:
        x = _as_point(x, self.dim)
        mu, sigma_sq = self.kernel(t)
        return self._local(x, t, mu, sigma_sq)

    def _local(self, x, t, mu, sigma_sq):
        raise NotImplementedError

    def score(self, x, t):
        return self.local(x, t).score()

    def log_density(self, x, t):
        return self.local(x, t).log_density()

    def hvp(self, x, t, v):
        return self.local(x, t).hvp(v)

    def divergence(self, x, t):
        return self.local(x, t).divergence()

    def dense_hessian(self, x, t, dense_limit=DENSE_LIMIT, symmetrize=True):
        """Assemble ``H`` column by column from HVPs on the coordinate basis."""
        if self.dim > dense_limit:
            raise CapacityError(f"D={self.dim} exceeds dense limit {dense_limit}")
        oracle = self.local(x, t)
        eye = np.eye(self.dim)
        hess = np.column_stack([oracle.hvp(eye[:, j]) for j in range(self.dim)])
        if symmetrize:
            hess = 0.5 * (hess + hess.T)
        return hess


class _MixtureLocal(LocalOracle):
    def __init__(self, field, x, t, mu, sigma_sq):
        super().__init__(x, t, mu, sigma_sq)
        ref = field.reference_points
        # cheap screen ||mu y - x||^2 via one mat-vec; exact residuals are then
        # formed only for the rows that can carry weight
        approx = mu * mu * field.sq_norms - 2.0 * mu * (ref @ x) + float(x @ x)
        log_kernel = -np.maximum(approx, 0.0) / (2.0 * sigma_sq)
        screen = log_kernel > log_kernel.max() - PRUNE_NATS - 10.0
        diff = mu * ref[screen] - x
        log_kernel[screen] = -np.einsum("ij,ij->i", diff, diff) / (2.0 * sigma_sq)
        self._lse = logsumexp(log_kernel)
        self._num_points = ref.shape[0]
        log_w = log_kernel[screen] - self._lse
        keep = log_w > -PRUNE_NATS
        w = np.exp(log_w[keep])
        w /= w.sum()
        resid = diff[keep]
        self.mean_resid = w @ resid
        self.centered = resid - self.mean_resid
        self.weights = w

    def _hvp(self, v):
        s2 = self.sigma_sq
        proj = self.centered @ v
        return v / s2 - (self.centered.T @ (self.weights * proj)) / (s2 * s2)

    def score(self):
        return self.mean_resid / self.sigma_sq

    def log_density(self):
        return (
            -0.5 * self.dim * math.log(2.0 * math.pi * self.sigma_sq)
            - math.log(self._num_points)
            + self._lse
        )

    def divergence(self):
        s2 = self.sigma_sq
        spread = self.weights @ np.einsum("ij,ij->i", self.centered, self.centered)
        return -self.dim / s2 + spread / (s2 * s2)


class MixtureScoreField(ScoreField):
    """Exact score of ``p_t = (1/N) sum_i Normal(mu(t) x_i, sigma(t)^2 I)``.

    This is the diffused empirical distribution of a finite reference set.
    """

    def __init__(self, reference_points, schedule=None):
        pts = np.array(reference_points, dtype=float, ndmin=2)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DomainError("reference set must be an (N, D) array with N, D >= 1")
        if not np.all(np.isfinite(pts)):
            raise DomainError("reference set has non-finite entries")
        self.reference_points = pts
        self.sq_norms = np.einsum("ij,ij->i", pts, pts)
        self.dim = pts.shape[1]
        self.schedule = schedule or NoiseSchedule()

    @property
    def num_points(self):
        return self.reference_points.shape[0]

    def _local(self, x, t, mu, sigma_sq):
        return _MixtureLocal(self, x, t, mu, sigma_sq)


class _AffineLocal(LocalOracle):
    def __init__(self, field, x, t, mu, sigma_sq):
        super().__init__(x, t, mu, sigma_sq)
        self.basis = field.basis
        self.tangent_var = (mu * field.scales) ** 2
        self.denom = self.tangent_var + sigma_sq
        # Woodbury: Cov^-1 = (I - U diag(shrink) U^T) / sigma^2
        self.shrink = self.tangent_var / self.denom
        self.offset = x - mu * field.center

    def _hvp(self, v):
        coef = self.shrink * (self.basis.T @ v)
        return (v - self.basis @ coef) / self.sigma_sq

    def score(self):
        return -self._hvp(self.offset)

    def log_density(self):
        d = self.basis.shape[1]
        quad = float(self.offset @ self._hvp(self.offset))
        logdet = np.log(self.denom).sum() + (self.dim - d) * math.log(self.sigma_sq)
        return -0.5 * (self.dim * math.log(2.0 * math.pi) + logdet + quad)

    def divergence(self):
        d = self.basis.shape[1]
        return -(np.sum(1.0 / self.denom) + (self.dim - d) / self.sigma_sq)


class AffineGaussianScoreField(ScoreField):
    """Gaussian supported near a ``d``-dimensional affine subspace.

    ``p_0 = Normal(center, U diag(scales^2) U^T)``; after diffusion the
    Hessian is constant in ``x`` with eigenvalues ``1/(mu^2 s_k^2 + sigma^2)``
    along the tangent frame and ``1/sigma^2`` along the normal space.
    """

    def __init__(self, basis, scales=None, center=None, schedule=None):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim != 2:
            raise DomainError("basis must be a (D, d) matrix")
        dim, d = basis.shape
        if d > dim or dim < 1:
            raise DomainError(f"need 0 <= d <= D, got basis shape {basis.shape}")
        if d and np.max(np.abs(basis.T @ basis - np.eye(d))) > 1e-10:
            raise DomainError("basis columns must be orthonormal")
        scales = np.ones(d) if scales is None else np.broadcast_to(
            np.asarray(scales, dtype=float), (d,)).copy()
        if np.any(scales <= 0):
            raise DomainError("tangent scales must be positive")
        self.basis = basis
        self.scales = scales
        self.dim = dim
        self.center = np.zeros(dim) if center is None else _as_point(center, dim)
        self.schedule = schedule or NoiseSchedule()

    @classmethod
    def random(cls, dim, intrinsic_dim, scales=1.0, seed=0, center=None, schedule=None):
        """Field with a random orthonormal tangent frame drawn from ``seed``."""
        rng = np.random.default_rng(seed)
        basis = random_orthonormal(dim, intrinsic_dim, rng)
        return cls(basis, scales=scales, center=center, schedule=schedule)

    @property
    def intrinsic_dim(self):
        return self.basis.shape[1]

    def eigenvalues(self, t):
        """Exact Hessian spectrum at time ``t``, ascending."""
        mu, sigma_sq = self.kernel(t)
        tangent = 1.0 / ((mu * self.scales) ** 2 + sigma_sq)
        normal = np.full(self.dim - self.intrinsic_dim, 1.0 / sigma_sq)
        return np.sort(np.concatenate([tangent, normal]))

    def sample(self, n, rng):
        """Draw ``n`` clean points from ``p_0`` (they lie on the subspace)."""
        z = rng.standard_normal((n, self.intrinsic_dim)) * self.scales
        return self.center + z @ self.basis.T

    def _local(self, x, t, mu, sigma_sq):
        return _AffineLocal(self, x, t, mu, sigma_sq)


def random_orthonormal(dim, k, rng):
    """``dim x k`` matrix with orthonormal columns (QR of a Gaussian matrix)."""
    if k == 0:
        return np.zeros((dim, 0))
    q, r = np.linalg.qr(rng.standard_normal((dim, k)))
    # sign fix makes the draw Haar-distributed
    return q * np.sign(np.diag(r))


DIAG_RADEMACHER = "diag-rademacher"
GAUSSIAN_SYM = "gaussian-sym"
_BLOCK_ROWS = 64


class _PerturbedLocal(LocalOracle):
    def __init__(self, field, inner, x, t, mu, sigma_sq):
        super().__init__(x, t, mu, sigma_sq)
        self.field = field
        self.inner = inner
        self.scale = field.epsilon / sigma_sq

    def _apply_error(self, v):
        return self.scale * self.field.unit_error(v)

    def _hvp(self, v):
        return self.inner._hvp(v) + self._apply_error(v)

    def error_trace(self):
        return self.scale * self.field.unit_error_trace()

    def score(self):
        return self.inner.score() - self._apply_error(self.x - self.field.anchor)

    def log_density(self):
        y = self.x - self.field.anchor
        return self.inner.log_density() - 0.5 * float(y @ self._apply_error(y))

    def divergence(self):
        return self.inner.divergence() - self.error_trace()


class PerturbedScoreField(ScoreField):
    """Inner field plus a seeded symmetric Hessian error ``E``.

    The score error is ``e(x) = -E (x - anchor)`` so that ``-grad e = E``.
    ``E`` scales as ``epsilon / sigma(t)^2``:

    * ``diag-rademacher``: ``E = (epsilon/sigma^2) diag(r)``, ``r_i = +-1``.
    * ``gaussian-sym``: ``E = (epsilon/sigma^2) (G + G^T) / (4 sqrt(2 D))``
      with ``G`` a seeded standard Gaussian matrix regenerated in row blocks on
      every application, so it is never stored. Its spectral norm is close
      to ``epsilon / (2 sigma^2)``.
    """

    def __init__(self, inner, epsilon, perturbation_seed=0, mode=DIAG_RADEMACHER,
                 anchor=None):
        if mode not in (DIAG_RADEMACHER, GAUSSIAN_SYM):
            raise DomainError(f"unknown perturbation mode {mode!r}")
        if not math.isfinite(epsilon):
            raise DomainError("epsilon must be finite")
        self.inner = inner
        self.epsilon = float(epsilon)
        self.seed = int(perturbation_seed)
        self.mode = mode
        self.dim = inner.dim
        self.schedule = inner.schedule
        self.anchor = np.zeros(self.dim) if anchor is None else _as_point(anchor, self.dim)
        if mode == DIAG_RADEMACHER:
            rng = np.random.default_rng([self.seed, 0])
            self._signs = rng.integers(0, 2, self.dim) * 2.0 - 1.0

    def _blocks(self):
        for b, start in enumerate(range(0, self.dim, _BLOCK_ROWS)):
            stop = min(start + _BLOCK_ROWS, self.dim)
            rng = np.random.default_rng([self.seed, 1, b])
            yield start, stop, rng.standard_normal((stop - start, self.dim))

    def unit_error(self, v):
        """Apply ``E`` with the ``epsilon / sigma^2`` factor removed."""
        if self.mode == DIAG_RADEMACHER:
            return self._signs * v
        out = np.zeros(self.dim)
        for start, stop, g in self._blocks():
            out[start:stop] += g @ v
            out += g.T @ v[start:stop]
        return out / (4.0 * math.sqrt(2.0 * self.dim))

    def unit_error_trace(self):
        if self.mode == DIAG_RADEMACHER:
            return float(self._signs.sum())
        total = 0.0
        for start, stop, g in self._blocks():
            total += np.trace(g[:, start:stop])
        return 2.0 * total / (4.0 * math.sqrt(2.0 * self.dim))

    def _local(self, x, t, mu, sigma_sq):
        inner = self.inner._local(x, t, mu, sigma_sq)
        return _PerturbedLocal(self, inner, x, t, mu, sigma_sq)
