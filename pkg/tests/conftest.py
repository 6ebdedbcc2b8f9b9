from random import Random

import numpy as np
import pytest

from dcp import he


@pytest.fixture(scope="session")
def tparams():
    return he.test_params()


@pytest.fixture(scope="session")
def session_keypair(tparams):
    return he.keygen(tparams, Random(0x5E55104))


@pytest.fixture
def rng():
    return Random(0xA11CE)


@pytest.fixture
def np_rng():
    return np.random.default_rng(0xA11CE)
