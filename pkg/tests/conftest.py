import numpy as np
import pytest

from mfld import cube


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_measure(rng, n, scale=1.0):
    return cube.measure_from_table(n, scale * rng.normal(size=1 << n))


def random_function(rng, n, scale=1.0):
    return cube.CubeFunction(n, scale * rng.normal(size=1 << n))
