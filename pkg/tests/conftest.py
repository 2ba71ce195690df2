import numpy as np
import pytest

from stwave.mesh import MeshHierarchy


@pytest.fixture(scope="session")
def uniform4():
    """Criss-cross 4x4 mesh refined uniformly up to level 3."""
    return MeshHierarchy.uniform(4, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
