import pytest

from core import ModMap, SampleGrid, a_grid
from tests.helpers import CONVEX_CORPUS, function


@pytest.fixture
def square():
    return function("x1^2", [[0, 1]], name="square")


@pytest.fixture
def minus_one():
    return function("-1", [[0, 1]], name="minus_one")


@pytest.fixture
def zero_g():
    return ModMap.zero(1)


@pytest.fixture
def small_grid():
    return SampleGrid(points_per_axis=11, a_values=a_grid(11), s_values=(1.0,))


@pytest.fixture(params=CONVEX_CORPUS, ids=[entry[0] for entry in CONVEX_CORPUS])
def convex_member(request):
    name, text, bounds = request.param
    return function(text, bounds, name=name)
