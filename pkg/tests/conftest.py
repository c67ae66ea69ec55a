import numpy as np
import pytest

from heston_lda import ModelParams


@pytest.fixture
def p_default():
    """Ergodic baseline: a=2, b=1, sigma=0.5, rho=-0.5, v0=1."""
    return ModelParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
