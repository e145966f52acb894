"""
Shared fixtures and the --runslow switch for the statistical reproductions
"""
import numpy as np
import pytest

from app.services.legendre_basis import BasisConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow statistical tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long statistical reproduction, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def cfg3():
    """d=3, D=4: the basis of the Rosenbrock experiments (125 coefficients)"""
    return BasisConfig(d=3, D=4)
