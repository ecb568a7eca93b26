import pytest

from hvdc_modal.system import SystemParams, Topology


@pytest.fixture(scope="session")
def system():
    return SystemParams()


@pytest.fixture(scope="session")
def topology():
    return Topology()
