import pytest
from hypothesis import HealthCheck, settings

from discfrac.lattice import NormMap, SurfaceMap

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def paraboloid():
    return SurfaceMap("euclidean-square", 2)


@pytest.fixture
def hyperbolic():
    return SurfaceMap("hyperbolic-quadratic", 2)


@pytest.fixture
def euclid():
    return NormMap("euclidean", 2)


@pytest.fixture
def hypnorm():
    return NormMap("hyperbolic", 2)


MAP_PAIRS = [
    ("euclidean-square", "euclidean"),
    ("euclidean-square", "hyperbolic"),
    ("hyperbolic-quadratic", "euclidean"),
    ("hyperbolic-quadratic", "hyperbolic"),
]


def maps(gkind: str, tkind: str):
    return SurfaceMap(gkind, 2), NormMap(tkind, 2)
