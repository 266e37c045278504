import numpy as np
import pytest
from fractions import Fraction

from phi4local.coalgebra import Coalgebra
from phi4local.field import COARSE_GRID, DEFAULT_GRID, noise_field
from phi4local.lift import build_local_product
from phi4local.path import Path
from phi4local.symtree import enumerate_universe


@pytest.fixture(scope="session")
def u920():
    return enumerate_universe(Fraction(9, 20))


@pytest.fixture(scope="session")
def u310():
    return enumerate_universe(Fraction(3, 10))


@pytest.fixture(scope="session")
def u25():
    return enumerate_universe(Fraction(2, 5))


@pytest.fixture(scope="session")
def cg920(u920):
    return Coalgebra(u920)


@pytest.fixture(scope="session")
def coarse_path(u920, cg920):
    grid = COARSE_GRID
    xi = noise_field(grid, "trig", seed=0)
    lp = build_local_product(grid, u920, xi, coalg=cg920)
    return Path(lp)


@pytest.fixture(scope="session")
def default_path_trig(u920, cg920):
    grid = DEFAULT_GRID
    xi = noise_field(grid, "trig", seed=0, amp=2.0)
    lp = build_local_product(grid, u920, xi, coalg=cg920)
    return Path(lp)


@pytest.fixture(scope="session")
def default_path_gauss(u920, cg920):
    grid = DEFAULT_GRID
    xi = noise_field(grid, "gauss", seed=21, eps=1 / 8, amp=0.1)
    lp = build_local_product(grid, u920, xi, coalg=cg920)
    return Path(lp)


@pytest.fixture()
def smooth_v1():
    grid = DEFAULT_GRID
    return 0.5 + 0.3 * np.sin(2.0 * grid.x_field) * np.cos(1.5 * grid.t_field)
