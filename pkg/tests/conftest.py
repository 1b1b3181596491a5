import numpy as np
import pytest

from mfbsde.core import build_grid, simulate_brownian


@pytest.fixture(scope="session")
def grid50():
    return build_grid(1.0, 50)


@pytest.fixture(scope="session")
def ensemble50(grid50):
    # shared mid-size ensemble; treat as read-only in tests
    return simulate_brownian(grid50, 1, 20_000, 12345)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(987654321)
