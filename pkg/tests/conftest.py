import pytest

from swapqkd import bell


@pytest.fixture(scope="session")
def conv():
    return bell.convention()
