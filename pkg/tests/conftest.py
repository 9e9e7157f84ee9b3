import pytest

from lib.cli import parse_model
from lib.pidgla import PullbackAlgebroid

BUNDLED = ["abelian", "dim2-nonabelian", "sl2-borel", "sl2-cartan", "foliation-chart", "gl1-action"]
POINT_MODELS = ["abelian", "dim2-nonabelian", "sl2-borel", "sl2-cartan"]

_pullbacks = {}


def load_pullback(name):
    """One PullbackAlgebroid per bundled model for the whole session"""
    if name not in _pullbacks:
        _pullbacks[name] = PullbackAlgebroid(parse_model(name))
    return _pullbacks[name]


@pytest.fixture
def models():
    return {name: parse_model(name) for name in BUNDLED}


@pytest.fixture(params=BUNDLED)
def bundled_pi(request):
    return load_pullback(request.param)


@pytest.fixture
def abelian():
    return load_pullback("abelian")


@pytest.fixture
def dim2():
    return load_pullback("dim2-nonabelian")


@pytest.fixture
def sl2():
    return load_pullback("sl2-borel")


@pytest.fixture
def cartan():
    return load_pullback("sl2-cartan")


@pytest.fixture
def foliation():
    return load_pullback("foliation-chart")


@pytest.fixture
def gl1():
    return load_pullback("gl1-action")
