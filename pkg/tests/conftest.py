import warnings

import numpy as np
import pytest

from aririnterp.interpolation import prepare_grid
from aririnterp.oracle import ShoeboxRoom, lattice_positions, simulate_grid

FS = 44100.0
C = 343.0

# Shared oracle scenario: 14 x 10 x 4.1 m shoebox, 3 x 3 grid of 2 m spacing
# at 1.2 m height, source off-center and 1.5 m above the grid plane.
ROOM_DIMS = (14.0, 10.0, 4.1)
ABSORPTION = 0.3
GRID_ORIGIN = (6.0, 3.0)
GRID_HEIGHT = 1.2
SPACING = 2.0
SOURCE = np.array([4.3, 6.2, 2.7])


@pytest.fixture(scope="session")
def room():
    return ShoeboxRoom(ROOM_DIMS, ABSORPTION)


@pytest.fixture(scope="session")
def grid_positions():
    return lattice_positions(GRID_ORIGIN, (3, 3), SPACING, GRID_HEIGHT)


@pytest.fixture(scope="session")
def oracle_grid(room, grid_positions):
    return simulate_grid(room, SOURCE, grid_positions, SPACING, order=3,
                         sample_rate=FS, duration=0.2, max_order=10)


@pytest.fixture(scope="session")
def prepared(oracle_grid):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return prepare_grid(oracle_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
