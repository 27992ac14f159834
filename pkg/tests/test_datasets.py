import numpy as np
import pytest
from hypothesis import given, strategies as st

from lhsd.datasets import (LINEAR, SINUSOIDAL, FunnelParams, IdrEmbedding, LabeledDataset,
                           MixtureSpec, MoonParams, funnel_lid, generate_funnel,
                           generate_mixture, generate_moon, idr_embed, in_crescent, mae,
                           moon_thickness, place_centroids, sinusoidal_map, split)
from lhsd.errors import DomainError


def pairwise_min(c):
    d = np.linalg.norm(c[:, None] - c[None], axis=-1)
    return d[np.triu_indices(len(c), 1)].min()


def numerical_jacobian(fn, x, h=1e-6):
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fn(x + e) - fn(x - e)) / (2 * h))
    return np.column_stack(cols)


def test_labeled_dataset_validation():
    with pytest.raises(DomainError):
        LabeledDataset(np.zeros((3, 2)), [1, 1, 3], [0, 0, 0])
    with pytest.raises(DomainError):
        LabeledDataset(np.zeros((3, 2)), [1, 1], [0, 0, 0])
    ds = LabeledDataset(np.zeros((4, 2)), [1, 1, 2, 0], [0, 0, 1, 1])
    a, b = split(ds, 3)
    assert len(a) == 3 and len(b) == 1 and ds.dim == 2
    with pytest.raises(DomainError):
        split(ds, 4)


@pytest.mark.parametrize("seed", range(4))
def test_mixture_centroids_separated(seed):
    ds = generate_mixture(MixtureSpec(16, (2, 4, 8, 3, 5), 10, seed=seed))
    assert pairwise_min(ds.meta["centroids"]) >= 20


def test_centroid_placement_failure():
    with pytest.raises(DomainError):
        place_centroids(3, 1, 20.0, np.random.default_rng(0), max_tries=1)


def test_mixture_linear_residual():
    ds = generate_mixture(MixtureSpec(16, (4,), 200, seed=3))
    a, c = ds.meta["frames"][0], ds.meta["centroids"][0]
    resid = (ds.points - c) - (ds.points - c) @ a @ a.T
    assert np.abs(resid).max() < 1e-12
    assert np.all(ds.gt_lid == 4)


def test_mixture_full_dimensional_cube():
    ds = generate_mixture(MixtureSpec(5, (5,), 2000, seed=1))
    a, c = ds.meta["frames"][0], ds.meta["centroids"][0]
    z = (ds.points - c) @ a
    assert np.all(np.abs(z) <= 1 + 1e-12)
    assert np.linalg.matrix_rank(ds.points - ds.points.mean(0)) == 5
    assert np.all(ds.gt_lid == 5)


def test_mixture_labels_follow_components():
    ds = generate_mixture(MixtureSpec(12, (2, 7), num_samples=300, seed=2))
    assert np.array_equal(ds.gt_lid, np.where(ds.component_id == 0, 2, 7))
    assert len(ds) == 300


@given(st.floats(0.1, 10.0))
def test_sinusoidal_map_monotone(omega):
    h = np.linspace(-20, 20, 4001)
    g = sinusoidal_map(h, omega)
    assert np.all(np.diff(g) > 0)
    d = np.diff(g) / np.diff(h)
    assert d.min() > 0.5 ** 5 - 1e-9 and d.max() < 1.5 ** 5 + 1e-9


def test_sinusoidal_mixture_jacobian_nonsingular():
    spec = MixtureSpec(10, (3,), 20, nonlinearity=SINUSOIDAL, seed=4)
    ds = generate_mixture(spec)
    a = ds.meta["frames"][0]
    rng = np.random.default_rng(0)
    for z in rng.uniform(-1, 1, (10, 3)):
        jac = numerical_jacobian(lambda u: sinusoidal_map(a @ u), z)
        assert np.linalg.svd(jac, compute_uv=False).min() > 0.4
    assert np.all(ds.gt_lid == 3)


def test_moon_membership_and_labels():
    p = MoonParams(N=2000, seed=3)
    ds = generate_moon(p)
    assert np.all(in_crescent(ds.points[:, 0], ds.points[:, 1], p))
    assert set(np.unique(ds.gt_lid)) <= {1.0, 2.0, 3.0}
    tau = moon_thickness(np.arctan2(ds.points[:, 1], ds.points[:, 0]), p.r)
    assert np.all(np.abs(ds.points[:, 2]) <= tau)


def test_moon_thickness_profile():
    assert moon_thickness(np.pi / 2, 2.0) == pytest.approx(0.002)
    assert moon_thickness(-np.pi / 2, 2.0) == pytest.approx(0.402)
    with pytest.raises(DomainError):
        generate_moon(MoonParams(r=1.0, r_inner=2.0, shift=0.5))


def test_funnel_labels():
    p = FunnelParams(N=3000, seed=1)
    ds = generate_funnel(p)
    assert ds.gt_lid.min() >= 1 and ds.gt_lid.max() <= 3
    r = np.hypot(ds.points[:, 1], ds.points[:, 2])
    assert np.all(ds.gt_lid[r <= p.r_stick] == 1)
    assert np.all(ds.gt_lid[r >= p.r_skirt] == 3)
    assert np.allclose(r, p.r0 * np.exp(-(ds.points[:, 0] + p.t_shift)), rtol=1e-12)
    order = np.argsort(r)
    assert np.all(np.diff(ds.gt_lid[order]) >= 0)


def test_funnel_lid_midpoint_and_errors():
    assert funnel_lid(0.275, 0.05, 0.5) == pytest.approx(2.0)
    assert funnel_lid(0.05, 0.05, 0.5) == 1 and funnel_lid(0.5, 0.05, 0.5) == 3
    with pytest.raises(DomainError):
        generate_funnel(FunnelParams(r_stick=0.5, r_skirt=0.5))
    with pytest.raises(DomainError):
        generate_funnel(FunnelParams(t_min=1, t_max=1))


def test_idr_preserves_labels_and_is_deterministic():
    base = generate_moon(MoonParams(N=200, seed=0))
    a = idr_embed(base, 784, 32, seed=5)
    b = idr_embed(base, 784, 32, seed=5)
    assert a.points.shape == (200, 784)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.gt_lid, base.gt_lid)
    with pytest.raises(DomainError):
        idr_embed(base, 60, 32)


def test_idr_jacobian_rank():
    emb = IdrEmbedding.random(3, 784, 32, seed=2)
    base = generate_moon(MoonParams(N=10, seed=1)).points
    for x in base:
        sv = np.linalg.svd(numerical_jacobian(emb, x), compute_uv=False)
        assert np.sum(sv > 1e-8 * sv[0]) == 3
    with pytest.raises(DomainError):
        emb(np.zeros(2))


def test_idr_clamp():
    emb = IdrEmbedding.random(2, 100, 8, seed=0, clamp=True)
    out = emb(np.random.default_rng(0).standard_normal((20, 2)) * 5)
    assert out.min() >= 0 and out.max() <= 1


def test_generators_deterministic():
    s = MixtureSpec(8, (2, 3), 30, nonlinearity=SINUSOIDAL, seed=7)
    assert np.array_equal(generate_mixture(s).points, generate_mixture(s).points)
    assert np.array_equal(generate_moon(MoonParams(N=50, seed=2)).points,
                          generate_moon(MoonParams(N=50, seed=2)).points)
    assert np.array_equal(generate_funnel(FunnelParams(N=50, seed=2)).points,
                          generate_funnel(FunnelParams(N=50, seed=2)).points)
    assert not np.array_equal(generate_moon(MoonParams(N=50, seed=2)).points,
                              generate_moon(MoonParams(N=50, seed=3)).points)


def test_mae():
    gt = np.array([1.0, 2.0, 3.0])
    assert mae(gt, gt) == 0
    assert mae(gt + 1, gt) == 1
    assert mae([3, 5], [4, 5]) == 0.5
    with pytest.raises(DomainError):
        mae([], [])
    with pytest.raises(DomainError):
        mae([1, 2], [1])


def test_mixture_spec_validation():
    with pytest.raises(DomainError):
        MixtureSpec(4, (5,))
    with pytest.raises(DomainError):
        MixtureSpec(4, (2,), nonlinearity="cubic")
    assert MixtureSpec(4, (2,)).nonlinearity == LINEAR
