import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from conftest import MatrixOracle, random_symmetric
from lhsd.errors import CapacityError, DomainError, NumericError
from lhsd.slq import (SlqConfig, TridiagonalFactor, dense_sym_eigen, lanczos, probe_rng,
                      quadrature, rademacher_probe, rademacher_variance, trace_of_function,
                      tridiag_eigen)
from lhsd.spectral_filter import FilterParams, hill

H22 = np.array([[2.0, 1.0], [1.0, 2.0]])


def dense_fn(a, f):
    w, q = np.linalg.eigh(a)
    return (q * f(w)) @ q.T


def test_rademacher_probe():
    v = rademacher_probe(3, probe_rng(5, 0, 0))
    assert set(np.unique(v)) <= {-1.0, 1.0}
    assert v @ v == 3
    assert np.array_equal(v, rademacher_probe(3, probe_rng(5, 0, 0)))
    assert not np.array_equal(rademacher_probe(64, probe_rng(5, 0, 0)),
                              rademacher_probe(64, probe_rng(5, 0, 1)))


def test_rademacher_mean_concentrates():
    vs = np.array([rademacher_probe(16, probe_rng(1, 0, k)) for k in range(10_000)])
    assert np.max(np.abs(vs.mean(axis=0))) < 0.05


def test_lanczos_scaled_identity_breaks_down():
    fac = lanczos(MatrixOracle(3.0 * np.eye(8)), np.ones(8), 5)
    assert fac.alphas[0] == pytest.approx(3.0)
    assert fac.size == 1 and fac.truncated


def test_lanczos_two_by_two_by_hand():
    fac = lanczos(MatrixOracle(H22), np.array([1.0, 0.0]), 2)
    assert np.allclose(fac.alphas, [2.0, 2.0])
    assert np.allclose(fac.betas, [1.0])
    assert np.allclose(fac.matrix(), H22)


def test_lanczos_orthogonality_with_reorth(rng):
    a = random_symmetric(64, rng)
    fac = lanczos(MatrixOracle(a), rng.standard_normal(64), 30, keep_basis=True)
    gram = fac.basis @ fac.basis.T
    assert np.max(np.abs(gram - np.eye(fac.size))) < 1e-8


def test_lanczos_call_count(rng):
    oracle = MatrixOracle(random_symmetric(20, rng))
    fac = lanczos(oracle, rademacher_probe(20, probe_rng(0)), 7)
    assert oracle.hvp_calls == fac.hvp_calls == 7
    assert np.all(fac.betas >= 0)


def test_lanczos_errors():
    with pytest.raises(DomainError):
        lanczos(MatrixOracle(np.eye(3)), np.zeros(3), 2)
    bad = MatrixOracle(np.full((3, 3), np.nan))
    with pytest.raises(NumericError, match="step 0"):
        lanczos(bad, np.ones(3), 2)


def test_tridiag_eigen_by_hand():
    rule = tridiag_eigen(TridiagonalFactor(np.array([2.0, 2.0]), np.array([1.0]), 2.0))
    assert np.allclose(rule.nodes, [1.0, 3.0], atol=1e-14)
    assert np.allclose(rule.weights, [0.5, 0.5], atol=1e-14)


def test_tridiag_eigen_diagonal():
    rule = tridiag_eigen(TridiagonalFactor(np.array([4.0]), np.array([]), 1.0))
    assert rule.nodes.tolist() == [4.0] and rule.weights.tolist() == [1.0]


@given(st.integers(1, 64), st.integers(0, 2**31))
def test_tridiag_eigen_against_lapack(m, seed):
    r = np.random.default_rng(seed)
    a, b = r.standard_normal(m), np.abs(r.standard_normal(m - 1))
    rule = tridiag_eigen(TridiagonalFactor(a, b, 1.0))
    ref = eigh_tridiagonal(a, b, eigvals_only=True)
    scale = max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(rule.nodes - ref)) < 1e-12 * scale
    assert abs(rule.weights.sum() - 1) < 1e-10


def test_tridiag_reconstruction(rng):
    a, b = rng.standard_normal(16), np.abs(rng.standard_normal(15))
    fac = TridiagonalFactor(a, b, 1.0)
    rule = tridiag_eigen(fac, vectors=True)
    y = rule.vectors
    assert np.allclose(rule.weights, y[0] ** 2, atol=1e-14)
    assert np.max(np.abs(y @ np.diag(rule.nodes) @ y.T - fac.matrix())) < 1e-10


def test_quadrature_zeroth_moment(rng):
    a = random_symmetric(12, rng)
    v = rademacher_probe(12, probe_rng(0))
    fac = lanczos(MatrixOracle(a), v, 4)
    assert quadrature(tridiag_eigen(fac), np.ones_like, fac.probe_norm_sq) == pytest.approx(12)


@pytest.mark.parametrize("m", [2, 3, 5])
def test_moment_matching(m, rng):
    a = random_symmetric(32, rng)
    v = rademacher_probe(32, probe_rng(3))
    fac = lanczos(MatrixOracle(a), v, m)
    rule = tridiag_eigen(fac)
    for k in range(2 * m):
        exact = v @ np.linalg.matrix_power(a, k) @ v
        approx = quadrature(rule, lambda x: x ** k, fac.probe_norm_sq)
        assert abs(approx - exact) <= 1e-8 * max(1.0, abs(exact))


def test_full_rank_quadrature_is_exact(rng):
    a = random_symmetric(16, rng)
    f = hill(FilterParams(), 0.8)
    v = rademacher_probe(16, probe_rng(9))
    fac = lanczos(MatrixOracle(a), v, 16)
    exact = v @ dense_fn(a, f) @ v
    assert abs(quadrature(tridiag_eigen(fac), f, fac.probe_norm_sq) - exact) < 1e-9


def test_trace_of_constant_function():
    res = trace_of_function(MatrixOracle(np.diag(np.arange(1.0, 11.0))), 10, np.ones_like,
                            SlqConfig(m=3, K=4))
    assert np.allclose(res.per_probe, 10.0)


def test_trace_identity_on_diagonal_has_zero_variance():
    d = np.arange(1.0, 21.0)
    res = trace_of_function(MatrixOracle(np.diag(d)), 20, lambda x: x, SlqConfig(m=4, K=6))
    assert np.allclose(res.per_probe, d.sum())


def test_trace_unbiased_within_variance(rng):
    a = random_symmetric(64, rng)
    f = hill(FilterParams(), 4.0)
    fh = dense_fn(a, f)
    cfg = SlqConfig(m=10, K=512, seed=2)
    res = trace_of_function(MatrixOracle(a), 64, f, cfg)
    assert abs(res.estimate - np.trace(fh)) < 3 * np.sqrt(rademacher_variance(fh) / cfg.K)


def test_call_budget_is_m_times_k(rng):
    oracle = MatrixOracle(random_symmetric(40, rng))
    res = trace_of_function(oracle, 40, np.abs, SlqConfig(m=5, K=8))
    assert res.truncated_probes == 0
    assert res.hvp_calls == oracle.hvp_calls == 40


def test_trace_rejects_m_above_dim():
    with pytest.raises(DomainError):
        trace_of_function(MatrixOracle(np.eye(3)), 3, np.abs, SlqConfig(m=4))


def test_dense_sym_eigen():
    assert np.allclose(dense_sym_eigen(np.eye(5))[0], 1.0)
    assert np.allclose(dense_sym_eigen(H22)[0], [1.0, 3.0])
    with pytest.raises(DomainError):
        dense_sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(CapacityError):
        dense_sym_eigen(np.eye(5), dense_limit=4)


def test_dense_sym_eigen_recovers_constructed_spectrum(rng):
    q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    lam = np.sort(rng.uniform(-5, 5, 30))
    w, _ = dense_sym_eigen(q @ np.diag(lam) @ q.T)
    assert np.max(np.abs(w - lam)) < 1e-9


@pytest.mark.parametrize("kw", [dict(m=0), dict(K=0), dict(seed=-1)])
def test_config_validation(kw):
    with pytest.raises(DomainError):
        SlqConfig(**kw)


def test_dense_sym_eigen_tolerance_is_relative():
    a = np.array([[1e4, 2e4], [2e4 + 1e-6, 3e4]])
    assert dense_sym_eigen(a)[0].shape == (2,)
    with pytest.raises(DomainError):
        dense_sym_eigen(np.array([[1e4, 2e4], [2e4 + 1.0, 3e4]]))
