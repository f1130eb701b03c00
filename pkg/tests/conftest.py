import numpy as np
import pytest

from sinesiegel.cells import build_extension, build_layers
from sinesiegel.circlemaps import critical_preimages
from sinesiegel.model import ConformalModel


@pytest.fixture(scope="session")
def golden_model():
    return ConformalModel.build("golden")


@pytest.fixture(scope="session")
def golden_g(golden_model):
    return golden_model.doubled_circle_map()


@pytest.fixture(scope="session")
def golden_table6(golden_g):
    return critical_preimages(golden_g, 6)


@pytest.fixture(scope="session")
def golden_table8(golden_g):
    return critical_preimages(golden_g, 8)


@pytest.fixture(scope="session")
def golden_layers(golden_g, golden_table6):
    return build_layers(golden_g, 6, table=golden_table6)


@pytest.fixture(scope="session")
def golden_extension(golden_g, golden_table6):
    return build_extension(golden_g, 6, table=golden_table6)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260811)
