import pytest

from slc import formulas as F
from slc.cli import corpus_path


@pytest.fixture(autouse=True)
def fresh_names():
    F.reset_names()
    yield


@pytest.fixture
def bst_spec():
    return F.parse_spec(corpus_path("bst.sl").read_text())


@pytest.fixture
def bst_pre(bst_spec):
    return bst_spec.preconditions["remove"]
