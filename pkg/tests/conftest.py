import pytest

from miscpde import FieldSpec, default_qoi_spec
from miscpde.misc_core import MiscEvaluator


@pytest.fixture(scope="session")
def field1():
    return FieldSpec(d=1, nu=2.5, max_modes=8)


@pytest.fixture(scope="session")
def qoi1():
    return default_qoi_spec(1)


@pytest.fixture(scope="session")
def field3():
    return FieldSpec(d=3, nu=4.5, max_modes=10)


@pytest.fixture(scope="session")
def qoi3():
    return default_qoi_spec(3)


@pytest.fixture(scope="session")
def shared_evaluator1(field1, qoi1):
    """One warm cache for tests that only read estimator values."""
    return MiscEvaluator(field1, qoi1)
