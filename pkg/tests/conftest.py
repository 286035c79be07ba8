import numpy as np
import pytest

from lqgame.model import Prior, scalar_model


@pytest.fixture
def scalar_game():
    """T=1 symmetric scalar game with gains -1/3."""
    model = scalar_model(T=1, A=1.0, BP=1.0, BE=1.0, W=1.0, GP=1.0, GE=1.0, H=1.0, Q_stage=0.0, Q_terminal=1.0, R=1.0)
    prior = Prior(xhat0P=[1.0], W0P=[[1.0]], xhat0E=[1.0], W0E=[[1.0]])
    return model, prior


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
