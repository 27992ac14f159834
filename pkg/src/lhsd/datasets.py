"""Synthetic manifolds with per-point ground-truth intrinsic dimension."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .score_field import random_orthonormal

LINEAR = "linear"
SINUSOIDAL = "sinusoidal"


@dataclass
class LabeledDataset:
    points: np.ndarray
    gt_lid: np.ndarray
    component_id: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.gt_lid = np.asarray(self.gt_lid, dtype=float)
        self.component_id = np.asarray(self.component_id, dtype=int)
        n, dim = self.points.shape
        if n < 1 or dim < 1:
            raise DomainError("dataset needs N, D >= 1")
        if self.gt_lid.shape != (n,) or self.component_id.shape != (n,):
            raise DomainError("labels must have one entry per point")
        if np.any(self.gt_lid < 0) or np.any(self.gt_lid > dim):
            raise DomainError("ground-truth LID must lie in [0, D]")

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def subset(self, idx):
        return LabeledDataset(self.points[idx], self.gt_lid[idx], self.component_id[idx],
                              dict(self.meta))


def split(dataset, n_first):
    """Split into the first ``n_first`` rows and the remainder."""
    if not 0 < n_first < len(dataset):
        raise DomainError(f"cannot split {len(dataset)} rows at {n_first}")
    return dataset.subset(slice(0, n_first)), dataset.subset(slice(n_first, None))


def sinusoidal_map(h, omega=1.0, iterations=5):
    """``iterations`` rounds of ``h <- h + (0.5/omega) sin(omega h)``, elementwise.

    Each round has derivative ``1 + 0.5 cos(omega h)`` in ``[0.5, 1.5]``, so
    the composition is a diffeomorphism of each coordinate.
    """
    h = np.array(h, dtype=float)
    for _ in range(iterations):
        h = h + (0.5 / omega) * np.sin(omega * h)
    return h


@dataclass(frozen=True)
class MixtureSpec:
    """Disjoint uniform patches ``x = f(A z) + c_k`` with ``z ~ U(-1, 1)^{d_k}``.

    ``num_samples`` (when set) draws that many points with components chosen
    equiprobably; otherwise every component gets ``samples_per_component``.
    """

    ambient_D: int
    component_dims: tuple
    samples_per_component: int = 100
    nonlinearity: str = LINEAR
    omega: float = 1.0
    min_mode_distance: float = 20.0
    seed: int = 0
    num_samples: int | None = None
    iterations: int = 5
    max_tries: int = 10000

    def __post_init__(self):
        if self.ambient_D < 1 or not self.component_dims:
            raise DomainError("need D >= 1 and at least one component")
        if any(d < 0 or d > self.ambient_D for d in self.component_dims):
            raise DomainError("component dimensions must lie in [0, D]")
        if self.nonlinearity not in (LINEAR, SINUSOIDAL):
            raise DomainError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.omega <= 0:
            raise DomainError("omega must be positive")


def place_centroids(num, dim, min_distance, rng, max_tries=10000):
    """Sequential rejection sampling of centroids with pairwise distance
    ``>= min_distance``."""
    spread = min_distance * max(1.0, num / math.sqrt(dim))
    centroids = []
    for _ in range(num):
        for _ in range(max_tries):
            c = rng.normal(0.0, spread, dim)
            if all(np.linalg.norm(c - o) >= min_distance for o in centroids):
                centroids.append(c)
                break
        else:
            raise DomainError("centroid placement failed; increase max_tries or D")
    return np.array(centroids).reshape(num, dim)


def generate_mixture(spec: MixtureSpec) -> LabeledDataset:
    rng = np.random.default_rng(spec.seed)
    dims = list(spec.component_dims)
    ncomp = len(dims)
    centroids = place_centroids(ncomp, spec.ambient_D, spec.min_mode_distance, rng,
                                spec.max_tries)
    frames = [random_orthonormal(spec.ambient_D, d, rng) for d in dims]
    if spec.num_samples is not None:
        comp = rng.integers(0, ncomp, spec.num_samples)
    else:
        comp = np.repeat(np.arange(ncomp), spec.samples_per_component)
    points = np.empty((comp.size, spec.ambient_D))
    for k, (d, frame) in enumerate(zip(dims, frames)):
        idx = np.flatnonzero(comp == k)
        h = rng.uniform(-1.0, 1.0, (idx.size, d)) @ frame.T
        if spec.nonlinearity == SINUSOIDAL:
            h = sinusoidal_map(h, spec.omega, spec.iterations)
        points[idx] = h + centroids[k]
    params = asdict(spec)
    params["component_dims"] = dims
    meta = {"generator": "mixture", "seed": spec.seed, "params": params,
            "centroids": centroids, "frames": frames}
    return LabeledDataset(points, np.array(dims, dtype=float)[comp], comp, meta)


@dataclass(frozen=True)
class MoonParams:
    """Crescent slab. Geometric defaults are package choices, not canonical values."""

    r: float = 1.0
    r_inner: float = 1.0
    shift: float = 0.5
    scale: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)
    noise: float = 0.0
    eps: float = 0.05
    N: int = 1000
    seed: int = 0


def moon_thickness(phi, r):
    """Half-height of the slab at polar angle ``phi``."""
    return r * (0.001 + 0.1 * (1.0 - np.sin(phi)))


def in_crescent(x1, x2, params: MoonParams):
    return (x1 ** 2 + x2 ** 2 < params.r ** 2) & (
        x1 ** 2 + (x2 + params.shift) ** 2 > params.r_inner ** 2)


def generate_moon(params: MoonParams) -> LabeledDataset:
    """Uniform crescent in the plane, extruded by an angle-dependent thickness.

    Labels: 3 in the interior, 2 within ``eps`` of exactly one boundary type
    (side walls or top/bottom caps), 1 within ``eps`` of both.
    """
    p = params
    if p.r <= 0 or p.r_inner < 0 or p.r_inner >= p.r + p.shift:
        raise DomainError("moon parameters give an empty crescent")
    rng = np.random.default_rng(p.seed)
    xs = np.empty((0, 2))
    while xs.shape[0] < p.N:
        cand = rng.uniform(-p.r, p.r, (max(2 * p.N, 64), 2))
        xs = np.vstack([xs, cand[in_crescent(cand[:, 0], cand[:, 1], p)]])
    x1, x2 = xs[: p.N, 0], xs[: p.N, 1]
    phi = np.arctan2(x2, x1)
    tau = moon_thickness(phi, p.r)
    x3 = rng.uniform(-tau, tau)
    wall_gap = np.minimum(p.r - np.hypot(x1, x2), np.hypot(x1, x2 + p.shift) - p.r_inner)
    near_wall = wall_gap < p.eps
    near_cap = (tau - np.abs(x3)) < p.eps
    gt = 3.0 - near_wall - near_cap
    clean = np.column_stack([x1, x2, x3])
    pts = p.scale * clean + np.asarray(p.center, dtype=float)
    pts = pts + p.noise * rng.standard_normal(pts.shape)
    meta = {"generator": "moon", "seed": p.seed, "params": asdict(p)}
    return LabeledDataset(pts, gt, np.zeros(p.N, dtype=int), meta)


@dataclass(frozen=True)
class FunnelParams:
    """Exponentially narrowing surface of revolution. Defaults are package choices."""

    r0: float = 1.0
    t_min: float = 0.0
    t_max: float = 4.0
    t_shift: float = 2.0
    scale: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)
    noise: float = 0.0
    r_stick: float = 0.05
    r_skirt: float = 0.5
    N: int = 1000
    seed: int = 0


def funnel_lid(radius, r_stick, r_skirt):
    """1 below ``r_stick``, 3 above ``r_skirt``, cubic Hermite (smoothstep) between."""
    u = np.clip((np.asarray(radius, dtype=float) - r_stick) / (r_skirt - r_stick), 0, 1)
    return 1.0 + 2.0 * u * u * (3.0 - 2.0 * u)


def generate_funnel(params: FunnelParams) -> LabeledDataset:
    p = params
    if not p.t_min < p.t_max:
        raise DomainError("need t_min < t_max")
    if not 0 <= p.r_stick < p.r_skirt:
        raise DomainError("need 0 <= r_stick < r_skirt")
    rng = np.random.default_rng(p.seed)
    t = rng.uniform(p.t_min, p.t_max, p.N)
    theta = rng.uniform(0.0, 2.0 * np.pi, p.N)
    radius = p.r0 * np.exp(-t)
    base = np.column_stack([t - p.t_shift, radius * np.sin(theta), radius * np.cos(theta)])
    pts = p.scale * base + np.asarray(p.center, dtype=float)
    pts = pts + p.noise * rng.standard_normal(pts.shape)
    meta = {"generator": "funnel", "seed": p.seed, "params": asdict(p)}
    return LabeledDataset(pts, funnel_lid(radius, p.r_stick, p.r_skirt),
                          np.zeros(p.N, dtype=int), meta)


@dataclass
class IdrEmbedding:
    """``x -> offset + U phi(x)`` with random Fourier features
    ``phi(x) = [sin(Wx + b), cos(Wx + b), 1, ||x||^2]``."""

    W: np.ndarray
    b: np.ndarray
    basis: np.ndarray
    offset: np.ndarray
    clamp: bool = False

    @classmethod
    def random(cls, base_dim, target_D=784, num_features=32, seed=0, clamp=False):
        k = 2 * num_features + 2
        if target_D < k:
            raise DomainError(f"target_D={target_D} < 2K'+2={k}")
        rng = np.random.default_rng(seed)
        W = rng.standard_normal((num_features, base_dim))
        b = rng.uniform(0.0, 2.0 * np.pi, num_features)
        basis = random_orthonormal(target_D, k, rng)
        offset = rng.uniform(0.0, 1.0, target_D)
        return cls(W, b, basis, offset, clamp)

    def features(self, x):
        x = np.atleast_2d(x)
        z = x @ self.W.T + self.b
        ones = np.ones((x.shape[0], 1))
        return np.hstack([np.sin(z), np.cos(z), ones, np.sum(x * x, axis=1, keepdims=True)])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.W.shape[1]:
            raise DomainError("input dimension does not match the embedding")
        out = self.offset + self.features(x) @ self.basis.T
        if self.clamp:
            out = np.clip(out, 0.0, 1.0)
        return out if x.ndim > 1 else out[0]


def idr_embed(base: LabeledDataset, target_D=784, num_features=32, seed=0,
              clamp=False) -> LabeledDataset:
    """Lift a low-dimensional dataset into ``R^target_D``; labels are unchanged."""
    emb = IdrEmbedding.random(base.dim, target_D, num_features, seed, clamp)
    meta = dict(base.meta)
    meta.update(generator=f"idr-{base.meta.get('generator', 'base')}", seed=seed,
                base_seed=base.meta.get("seed"),
                params={"target_D": target_D, "num_features": num_features,
                        "clamp": clamp, "base": base.meta.get("params")})
    return LabeledDataset(emb(base.points), base.gt_lid.copy(), base.component_id.copy(),
                          meta)


def mae(estimates, gt):
    """Mean absolute error."""
    est = np.asarray(estimates, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if est.shape != gt.shape:
        raise DomainError("estimates and ground truth differ in length")
    if est.size == 0:
        raise DomainError("empty input")
    return float(np.mean(np.abs(est - gt)))
