import numpy as np
import pytest

from mgcurl.mesh import build_hierarchy
from mgcurl.multigrid import build_multigrid


@pytest.fixture(scope="session")
def grids3():
    return build_hierarchy(3)


@pytest.fixture(scope="session")
def grids2():
    return build_hierarchy(2)


@pytest.fixture(scope="session")
def mg_cache():
    cache = {}

    def get(levels, alpha, kind, eta=None, unsafe=False):
        key = (levels, alpha, kind, eta, unsafe)
        if key not in cache:
            cache[key] = build_multigrid(levels, alpha, kind, eta, unsafe_damping=unsafe)
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)
