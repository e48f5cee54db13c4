"""Shared fixtures; scripts/ is a flat module directory, so put it on sys.path."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'scripts'))

from simulate import Ensemble, Path, brownian_path, fbm_cholesky, simulate_ensemble  # noqa: E402

SEED = 20240101


@pytest.fixture
def linear_path():
    """f(t) = t on [0, 1] with 256 steps."""
    n = 256
    return Path(0.0, 1.0 / n, np.arange(n + 1, dtype=float) / n)


@pytest.fixture
def bm_path():
    return brownian_path(512, 1.0, seed=SEED)


@pytest.fixture
def bm_ensemble():
    return simulate_ensemble(brownian_path, 1000, SEED, n=256)


@pytest.fixture(scope='session')
def fbm07_ensemble():
    return simulate_ensemble(fbm_cholesky, 1000, SEED, h=0.7, n=256)


@pytest.fixture(scope='session')
def fbm03_ensemble():
    return simulate_ensemble(fbm_cholesky, 1000, SEED, stream=1, h=0.3, n=256)


@pytest.fixture
def small_ensemble():
    rng = np.random.default_rng(7)
    values = np.concatenate((np.zeros((4, 1)), np.cumsum(rng.standard_normal((4, 64)), axis=1)), axis=1)
    return Ensemble(0.0, 1.0 / 64, values / 8.0, master_seed=7)
