import numpy as np
import pytest

from finsler_hardy.families import make_flat_family, make_hyperbolic_family


@pytest.fixture(scope="session")
def flat_member():
    return make_flat_family(3, 2.0, 1.0)


@pytest.fixture(scope="session")
def flat_member_small_eps():
    return make_flat_family(3, 2.0, 0.1)


@pytest.fixture(scope="session")
def hyp_member():
    return make_hyperbolic_family(2, 2.0, 1.0, 0.0, 0.1)


@pytest.fixture(scope="session")
def hyp_member_weighted():
    return make_hyperbolic_family(3, 2.0, 1.0, 0.3, 0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_ball_points(rng, count, n, r_min, r_max):
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = rng.uniform(r_min, r_max, count)
    return d * r[:, None]
