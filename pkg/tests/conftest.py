import numpy as np
import pytest

from wavesource.core import SamplingGrid, Signal, TimeGrid, sphere_sensors


@pytest.fixture
def sig():
    return Signal.gaussian_sine()


@pytest.fixture
def sensors():
    return sphere_sensors(5.0, 8, 8)


@pytest.fixture
def small_sensors():
    return sphere_sensors(5.0, 4, 4)


@pytest.fixture
def timegrid():
    return TimeGrid(15.0, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_grid():
    return SamplingGrid.cube(1.0, 3)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
