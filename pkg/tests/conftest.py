import pytest
from tempfile import TemporaryDirectory
from pathlib import Path

from gnslab.constants import GNParams
from gnslab.grid import WeightedGrid


@pytest.fixture(scope='session')
def temp_folder():
    d = TemporaryDirectory()
    yield Path(d.name)
    d.cleanup()


@pytest.fixture()
def p4():
    return GNParams(4)


@pytest.fixture()
def p15():
    return GNParams(1.5)


@pytest.fixture()
def nu_grid(p4):
    return WeightedGrid.nu_p(p4, 128)


@pytest.fixture()
def xi_grid(p15):
    return WeightedGrid.xi_p(p15, 256)


@pytest.fixture()
def wide_grid():
    return WeightedGrid.uniform(-20, 20, 2001)
