import numpy as np
import pytest

from minkflow import AngleGrid, FSpec, GaugeProfile, Homothetic


def random_profile(rng, max_harmonic=6, budget=0.9):
    """Even-harmonic profile around 1 with ``a + a'' >= 1 - budget``."""
    harmonics = {}
    weights = []
    for m in range(2, max_harmonic + 1, 2):
        c, s = rng.uniform(-1, 1, size=2)
        harmonics[m] = (c, s)
        weights.append((abs(c) + abs(s)) * (m * m - 1))
    scale = budget * rng.uniform(0.2, 1.0) / sum(weights)
    return GaugeProfile(1.0, {m: (c * scale, s * scale) for m, (c, s) in harmonics.items()})


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(scope="session")
def grid256():
    return AngleGrid(256)


@pytest.fixture(scope="session")
def euclid():
    return GaugeProfile(1.0)


@pytest.fixture(scope="session")
def aniso():
    return GaugeProfile(1.0, {2: (0.3, 0.0)})


@pytest.fixture(scope="session")
def exp_family(euclid):
    return Homothetic(euclid, FSpec("exponential", 1.0))
