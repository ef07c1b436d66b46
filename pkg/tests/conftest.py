from functools import lru_cache

import numpy as np
import pytest

from slroots.discretize import discretize
from slroots.problem import builtin_problem


@lru_cache(maxsize=None)
def _system(name, resolution, degree, params):
    return discretize(builtin_problem(name, dict(params)), resolution, degree)


def system(name, resolution=32, degree=1, **params):
    """Cached assembled system; params must be hashable scalars."""
    return _system(name, resolution, degree, tuple(sorted(params.items())))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
