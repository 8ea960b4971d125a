import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from deconflict.dynamics import build_model
from deconflict.geometry import tube_from_trajectory
from deconflict.scenarios import gen_colliding_pair

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DELTA = 0.1


@pytest.fixture(scope="session")
def model():
    return build_model(0.1)


def colliding_pair(seed, model, ratio=0.5, T=4.0):
    """Pre-plans and tubes of one generated head-on pair."""
    rho = ratio * DELTA
    sc = gen_colliding_pair(seed, T=T, dt=model.dt, rho=rho)
    p = sc.preplans(model)
    return p[1], p[2], tube_from_trajectory(p[1], rho), tube_from_trajectory(p[2], rho)


@pytest.fixture(scope="session")
def pair(model):
    return colliding_pair(3, model)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
