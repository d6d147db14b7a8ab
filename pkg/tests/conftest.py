import numpy as np
import pytest

from molgen.molecule import default_valence_table, default_vocabulary


@pytest.fixture(scope="session")
def vocab():
    return default_vocabulary()


@pytest.fixture(scope="session")
def valence_table():
    return default_valence_table()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
