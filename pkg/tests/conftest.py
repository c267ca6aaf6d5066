import numpy as np
import pytest

from thermochain.dispersion import make_dispersion


@pytest.fixture(scope="session")
def acoustic():
    return make_dispersion("nn_unpinned")


@pytest.fixture(scope="session")
def pinned():
    return make_dispersion({"preset": "nn_pinned", "omega0": 1.0})


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
