"""Session fixtures."""

import pytest

from helpers import sensor_suite, varied_setups


@pytest.fixture(scope="session")
def setups():
    return varied_setups()


@pytest.fixture(scope="session")
def suite5():
    return sensor_suite()
