import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stochastic(rng, p, floor=0.0):
    P = rng.dirichlet(np.ones(p), size=p)
    if floor:
        P = (1 - floor) * P + floor / p
    return P
