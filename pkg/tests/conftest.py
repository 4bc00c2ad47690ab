import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from divfree_fns.features import DivFreeBasis
from divfree_fns.sphere import filter_active_neurons, refine_quasi_uniform, sample_gaussian_sphere

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def small_basis(n: int = 8, d: int = 2, k: int = 2, seed: int = 3) -> DivFreeBasis:
    ps = filter_active_neurons(refine_quasi_uniform(sample_gaussian_sphere(n, d, seed),
                                                    max_iters=30))
    return DivFreeBasis(ps, k)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
