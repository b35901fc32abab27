import numpy as np
import pytest

from crbc.analysis import mesh_hierarchy


@pytest.fixture(scope="session")
def hier():
    """Shared refinement chain, levels 1..7 (index 0 unused)."""
    return mesh_hierarchy(7)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240808)
