"""Stochastic Lanczos quadrature for ``tr f(H)`` with a matrix-free ``H``.

The pieces are usable on their own: Rademacher probes, Lanczos
tridiagonalization, an implicit-shift QL eigensolver for the tridiagonal
factor and the Gauss quadrature rule built from it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DomainError, NumericError

BREAKDOWN_RTOL = 1e-12
QL_MAX_SWEEPS = 60


@dataclass(frozen=True)
class SlqConfig:
    """Lanczos steps ``m``, probe count ``K`` and the root seed."""

    m: int = 5
    K: int = 8
    seed: int = 0
    reorthogonalize: bool = True
    dense_limit: int = 1024

    def __post_init__(self):
        if self.m < 1:
            raise DomainError(f"m must be >= 1, got {self.m}")
        if self.K < 1:
            raise DomainError(f"K must be >= 1, got {self.K}")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")


@dataclass
class TridiagonalFactor:
    """Diagonal ``alphas`` and off-diagonal ``betas`` of ``T_m``."""

    alphas: np.ndarray
    betas: np.ndarray
    probe_norm_sq: float
    hvp_calls: int = 0
    truncated: bool = False
    basis: np.ndarray | None = None

    @property
    def size(self):
        return len(self.alphas)

    def matrix(self):
        return np.diag(self.alphas) + np.diag(self.betas, 1) + np.diag(self.betas, -1)


@dataclass
class QuadratureRule:
    """Gauss rule: Ritz values ``nodes`` and squared first components ``weights``."""

    nodes: np.ndarray
    weights: np.ndarray
    vectors: np.ndarray | None = None


@dataclass
class TraceEstimate:
    estimate: float
    per_probe: np.ndarray
    hvp_calls: int
    truncated_probes: int = 0
    rules: list = field(default_factory=list)


def probe_rng(seed, point_index=0, probe_index=0):
    """Independent generator for one ``(seed, point, probe)`` triple.

    Streams depend only on the key, so serial and parallel runs agree.
    """
    return np.random.default_rng([int(seed), int(point_index), int(probe_index)])


def rademacher_probe(dim, rng):
    """Vector of i.i.d. +-1 entries."""
    if dim < 1:
        raise DomainError("dimension must be >= 1")
    return rng.integers(0, 2, size=dim) * 2.0 - 1.0


def _checked(hv, step):
    if not np.all(np.isfinite(hv)):
        raise NumericError(f"HVP oracle returned non-finite values at Lanczos step {step}")
    return hv


def lanczos(oracle, v0, m, reorthogonalize=True, keep_basis=False):
    """Run ``m`` steps of symmetric Lanczos started from ``v0``.

    Issues exactly one oracle call per step. Stops early when the next
    off-diagonal falls below ``1e-12 * ||H q_1||`` (an invariant subspace
    was found); the factor is then truncated and flagged.
    """
    v0 = np.asarray(v0, dtype=float)
    norm_sq = float(v0 @ v0)
    if norm_sq == 0.0 or not math.isfinite(norm_sq):
        raise DomainError("Lanczos start vector must be finite and nonzero")
    if m < 1:
        raise DomainError("m must be >= 1")
    dim = v0.shape[0]
    m = min(m, dim)
    basis = np.empty((m, dim))
    alphas, betas = [], []
    q = v0 / math.sqrt(norm_sq)
    basis[0] = q
    q_prev = np.zeros(dim)
    beta_prev = 0.0
    scale = None
    calls = 0
    truncated = False
    for j in range(m):
        w = _checked(oracle(q), j)
        calls += 1
        if scale is None:
            scale = float(np.linalg.norm(w))
        alpha = float(q @ w)
        alphas.append(alpha)
        if j == m - 1:
            break
        w = w - alpha * q - beta_prev * q_prev
        if reorthogonalize:
            active = basis[: j + 1]
            # two passes of classical Gram-Schmidt
            w -= active.T @ (active @ w)
            w -= active.T @ (active @ w)
        beta = float(np.linalg.norm(w))
        if beta <= BREAKDOWN_RTOL * scale:
            truncated = True
            break
        betas.append(beta)
        q_prev, q = q, w / beta
        beta_prev = beta
        basis[j + 1] = q
    k = len(alphas)
    return TridiagonalFactor(
        alphas=np.array(alphas),
        betas=np.array(betas),
        probe_norm_sq=norm_sq,
        hvp_calls=calls,
        truncated=truncated,
        basis=basis[:k].copy() if keep_basis else None,
    )


def tridiag_eigen(factor: TridiagonalFactor, vectors=False) -> QuadratureRule:
    """Eigen-decompose ``T_m`` by implicit-shift QL.

    Returns ascending Ritz values and the squared first-row eigenvector
    components as quadrature weights. The rotations are applied to the
    first row only unless ``vectors`` asks for the full eigenvector matrix.
    """
    d = [float(a) for a in factor.alphas]
    n = len(d)
    if n == 0:
        raise DomainError("empty tridiagonal factor")
    e = [float(b) for b in factor.betas] + [0.0] * (n - len(factor.betas))
    z = np.eye(n) if vectors else None
    row = [1.0] + [0.0] * (n - 1)
    eps = np.finfo(float).eps
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                if abs(e[m]) <= eps * (abs(d[m]) + abs(d[m + 1])):
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > QL_MAX_SWEEPS:
                raise NumericError("tridiagonal QL iteration did not converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            deflated = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = row[i]
                row[i] = c * zi - s * row[i + 1]
                row[i + 1] = s * zi + c * row[i + 1]
                if z is not None:
                    zc = z[:, i].copy()
                    z[:, i] = c * zc - s * z[:, i + 1]
                    z[:, i + 1] = s * zc + c * z[:, i + 1]
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    d = np.array(d)
    order = np.argsort(d)
    weights = np.array(row)[order] ** 2
    return QuadratureRule(nodes=d[order], weights=weights,
                          vectors=None if z is None else z[:, order])


def quadrature(rule: QuadratureRule, f, probe_norm_sq=1.0):
    """``||v||^2 sum_j tau_j^2 f(lambda_j)``."""
    return float(probe_norm_sq * np.sum(rule.weights * f(rule.nodes)))


def trace_of_function(oracle, dim, f, config: SlqConfig, point_index=0, keep_rules=False):
    """Hutchinson-Lanczos estimate of ``tr f(H)`` from ``K`` Rademacher probes."""
    if config.m > dim:
        raise DomainError(f"m={config.m} exceeds the dimension D={dim}")
    per_probe = np.empty(config.K)
    calls = 0
    truncated = 0
    rules = []
    for k in range(config.K):
        v = rademacher_probe(dim, probe_rng(config.seed, point_index, k))
        factor = lanczos(oracle, v, config.m, config.reorthogonalize)
        rule = tridiag_eigen(factor)
        per_probe[k] = quadrature(rule, f, factor.probe_norm_sq)
        calls += factor.hvp_calls
        truncated += factor.truncated
        if keep_rules:
            rules.append(rule)
    return TraceEstimate(float(per_probe.mean()), per_probe, calls, truncated, rules)


def dense_sym_eigen(a, dense_limit=1024, sym_tol=1e-8):
    """Full eigendecomposition of a dense symmetric matrix (LAPACK ``syevd``).

    ``sym_tol`` is relative to the largest entry magnitude (floored at 1).
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("expected a square matrix")
    if a.shape[0] > dense_limit:
        raise CapacityError(f"D={a.shape[0]} exceeds dense limit {dense_limit}")
    if a.size and np.max(np.abs(a - a.T)) > sym_tol * max(1.0, float(np.max(np.abs(a)))):
        raise DomainError("matrix is not symmetric within tolerance")
    return np.linalg.eigh(0.5 * (a + a.T))


def rademacher_variance(fh):
    """Variance of ``v^T A v`` for Rademacher ``v``: ``2||A||_F^2 - 2||diag A||^2``."""
    fh = np.asarray(fh, dtype=float)
    return 2.0 * np.sum(fh * fh) - 2.0 * np.sum(np.diag(fh) ** 2)
