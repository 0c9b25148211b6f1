import pytest

from censdist.geometry import DistanceInterval, Locale


def exact(*values, weight=1):
    return [DistanceInterval(v, v, weight) for v in values]


@pytest.fixture
def unit_square():
    return Locale.rectangle("sq", 0.0, 0.0, 1.0, 1.0)


@pytest.fixture
def right_square():
    return Locale.rectangle("right", 2.0, 0.0, 3.0, 1.0)
