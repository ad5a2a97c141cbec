import numpy as np
import pytest

from dalyap.io import resolve_map
from dalyap.mapmodel import PolyMap
from dalyap.spectral import assemble_spectral_info


def scalar_map(*coefs):
    """f(x) = coefs[0] x + coefs[1] x^2 + ..."""
    return PolyMap.from_terms(1, [{(k + 1,): c for k, c in enumerate(coefs)}])


@pytest.fixture(scope="session")
def ex1():
    return resolve_map("ex1")


@pytest.fixture(scope="session")
def ex2():
    return resolve_map("ex2")


@pytest.fixture(scope="session")
def zero2():
    return resolve_map("zero")


@pytest.fixture(scope="session")
def ex1_info(ex1):
    return assemble_spectral_info(ex1)


@pytest.fixture(scope="session")
def ex2_info(ex2):
    return assemble_spectral_info(ex2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
