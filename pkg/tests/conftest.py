import pytest

from dyntunnel.core import SpatialGrid, SystemParams
from dyntunnel.experiments import DoubletPipeline
from dyntunnel.propagator import PropagatorConfig


@pytest.fixture(scope="session")
def grid():
    return SpatialGrid(30.0, 1024)


@pytest.fixture(scope="session")
def config():
    return PropagatorConfig(steps_per_period=1024)


@pytest.fixture(scope="session")
def params13():
    return SystemParams(kappa=1.3, epsilon=0.2, hbar_eff=0.5)


@pytest.fixture(scope="session")
def params23():
    return SystemParams(kappa=2.3, epsilon=0.3, hbar_eff=0.5)


@pytest.fixture(scope="session")
def pipeline13(params13, grid, config):
    return DoubletPipeline(params13, grid, config)


@pytest.fixture(scope="session")
def pipeline23(params23, grid, config):
    return DoubletPipeline(params23, grid, config, n_basis=160)
