import pytest

from polarcb import ArrayConfig, PolarRegion


@pytest.fixture(scope="session")
def cfg387():
    return ArrayConfig(387, carrier_frequency=30e9)


@pytest.fixture(scope="session")
def cfg129():
    return ArrayConfig(129, carrier_frequency=30e9)


@pytest.fixture(scope="session")
def region():
    "Default service region: angles [-0.5, 0.5], ranges [4, 120] m."
    return PolarRegion(-0.5, 0.5, 4.0, 120.0)
