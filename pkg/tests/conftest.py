import numpy as np
import pytest

from ramimo.channel import SystemConfig, build_candidate_pool, sample_propagation
from ramimo.patterns import generate_pattern_set


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def patterns():
    return generate_pattern_set(10)


@pytest.fixture(scope="session")
def pool(cfg, patterns):
    return build_candidate_pool(sample_propagation(cfg, seed=7), patterns, cfg)
