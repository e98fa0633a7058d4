import numpy as np
import pytest

from osqm.grid import PhaseGrid


@pytest.fixture(scope="session")
def grid64():
    """Default 1-dof grid with enough margin for 1e-8 level checks."""
    return PhaseGrid.create(64, 9.0)


@pytest.fixture(scope="session")
def grid96():
    return PhaseGrid.create(96, 9.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(7)
