import numpy as np
import pytest

from hartree_balance.spectral_core import build_kernels, make_grid


@pytest.fixture(scope="session")
def grid3():
    return make_grid(3, 8.0, 32)


@pytest.fixture(scope="session")
def kernels_super(grid3):
    return build_kernels(grid3, 2.5, 1.0)


@pytest.fixture(scope="session")
def kernels_sub(grid3):
    return build_kernels(grid3, 1.5, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
