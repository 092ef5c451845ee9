import pytest

# Project
from hardy.utils import make_rng
from hardy.dilation import validate_dilation
from hardy.mixed_norm import ExponentVector
from hardy.quasi_norm import QuasiNormEvaluator

from .factories import *


@pytest.fixture
def diagonal():
    return validate_dilation([[2.0, 0.0], [0.0, 3.0]])


@pytest.fixture
def isotropic():
    return validate_dilation([[2.0, 0.0], [0.0, 2.0]])


@pytest.fixture
def shear():
    return validate_dilation([[2.0, 1.0], [0.0, 3.0]])


@pytest.fixture(params=["diagonal", "isotropic", "shear"])
def dilation(request):
    return request.getfixturevalue(request.param)


@pytest.fixture
def pv():
    return ExponentVector(("1/2", "1"))


@pytest.fixture
def pv_ones():
    return ExponentVector(("1", "1"))


@pytest.fixture
def evaluator(dilation):
    return QuasiNormEvaluator(dilation)


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def output_dir(settings, tmp_path):
    settings.ANISO_OUTPUT_DIR = str(tmp_path / "output")
    return settings.ANISO_OUTPUT_DIR
