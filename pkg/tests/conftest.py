import numpy as np
import pytest

from natcf.bench import toy_scm


@pytest.fixture(scope="session")
def toy1():
    return toy_scm(1)


@pytest.fixture(scope="session")
def toy2():
    return toy_scm(2)


@pytest.fixture(scope="session")
def toy3():
    return toy_scm(3)


@pytest.fixture(scope="session")
def toy4():
    return toy_scm(4)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
