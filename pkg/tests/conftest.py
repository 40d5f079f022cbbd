import numpy as np
import pytest

from jumpns.fields import Grid


@pytest.fixture(scope="session")
def grid16():
    return Grid(16)


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
