import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_symmetric(dim, rng, spread=1.0):
    a = rng.standard_normal((dim, dim)) * spread
    return 0.5 * (a + a.T)


class MatrixOracle:
    """Dense symmetric matrix behind the oracle interface, with a call counter."""

    def __init__(self, a):
        self.a = np.asarray(a, dtype=float)
        self.dim = self.a.shape[0]
        self.hvp_calls = 0

    def __call__(self, v):
        self.hvp_calls += 1
        return self.a @ v


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
