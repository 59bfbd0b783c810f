import numpy as np
import pytest

from ggiwtrack.core import GgiwState, MotionModel


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def cv_model():
    return MotionModel.constant_velocity()


@pytest.fixture
def loose_state():
    """A broad single-target prior used across update tests."""
    return GgiwState(m=[0.0, 0.0, 1.0, 0.0], P=np.diag([25.0, 25.0, 4.0, 4.0]),
                     v=20.0, V=14.0 * np.diag([50.0, 50.0]), alpha=8.0, beta=1.0)


def random_spd(rng, d=2, scale=1.0, singular=False):
    if singular:
        x = rng.normal(size=d)
        return scale * np.outer(x, x)
    a = rng.normal(size=(d, d))
    spd = scale * (a @ a.T + 0.1 * np.eye(d))
    return 0.5 * (spd + spd.T)
