import pytest

from spdzgen.modmath import DEFAULT_GROUP_256, TINY_GROUP


@pytest.fixture
def tiny():
    return TINY_GROUP


@pytest.fixture(scope="session")
def group256():
    return DEFAULT_GROUP_256
