"""
Shared pytest fixtures for hullstate
Bundled networks, their power-flow truth and noiseless measurement sets
"""

from pathlib import Path

import pytest

from measurements import load_placement, synthesize
from models import Scenario
from network import load_network, solve_power_flow

DATA_DIR = Path(__file__).resolve().parent / "data"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance runs (Monte Carlo campaigns, sampled soundness)")


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def two_bus():
    return load_network(DATA_DIR / "two_bus.json")


@pytest.fixture(scope="session")
def toy6():
    return load_network(DATA_DIR / "toy6.json")


@pytest.fixture(scope="session")
def ieee34():
    return load_network(DATA_DIR / "ieee34_mod.json")


@pytest.fixture(scope="session")
def two_bus_truth(two_bus):
    return solve_power_flow(two_bus)


@pytest.fixture(scope="session")
def toy6_truth(toy6):
    return solve_power_flow(toy6)


@pytest.fixture(scope="session")
def ieee34_truth(ieee34):
    return solve_power_flow(ieee34)


@pytest.fixture(scope="session")
def base_placement():
    return load_placement(DATA_DIR / "feeder34_base.json")


@pytest.fixture(scope="session")
def two_bus_measurements(two_bus_truth):
    return synthesize(load_placement(DATA_DIR / "two_bus_placement.json"), two_bus_truth)


@pytest.fixture(scope="session")
def toy6_measurements(toy6_truth):
    return synthesize(load_placement(DATA_DIR / "toy6_placement.json"), toy6_truth)


@pytest.fixture(scope="session")
def ieee34_measurements(base_placement, ieee34_truth):
    return synthesize(base_placement, ieee34_truth)


@pytest.fixture
def small_scenario() -> Scenario:
    """34-bus base placement scenario sized for unit tests"""
    return Scenario(net_path=DATA_DIR / "ieee34_mod.json", placement_path=DATA_DIR / "feeder34_base.json",
                    trials=4, base_seed=7, timing_repeats=2, warmup=0, threads=1)
