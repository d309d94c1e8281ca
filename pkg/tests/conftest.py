import json

import numpy as np
import pytest

from qsl.dynamics import TimeGrid
from qsl.sampling import random_density, random_hermitian, random_ket, random_lindblad, random_protocol


@pytest.fixture
def rng():
    """Seeded generator so every test sees the same random instances."""
    return np.random.default_rng(20240611)


@pytest.fixture
def grid():
    return TimeGrid(t_end=1.0, steps=200)


@pytest.fixture
def make_hermitian(rng):
    return lambda d, scale=1.0: random_hermitian(rng, d, scale)


@pytest.fixture
def make_ket(rng):
    return lambda d: random_ket(rng, d)


@pytest.fixture
def make_density(rng):
    return lambda d, rank=None: random_density(rng, d, rank)


@pytest.fixture
def make_protocol(rng):
    return lambda d, grid, n_terms=1: random_protocol(rng, d, grid, n_terms)


@pytest.fixture
def make_lindblad(rng):
    return lambda d, grid, n_channels=2: random_lindblad(rng, d, grid, n_channels)


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict to a JSON file under the test's temporary directory."""
    def _write(config: dict, name: str = "config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(config), encoding='utf-8')
        return path
    return _write
