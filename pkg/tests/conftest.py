import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from eigenpower.linalg import random_hermitian
from eigenpower.statevector import make_rng

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return make_rng(1234)


def herm(n, seed, scale=1.0):
    return random_hermitian(n, make_rng(seed), scale)


def allclose(a, b, atol):
    return np.allclose(np.asarray(a), np.asarray(b), rtol=0, atol=atol)
