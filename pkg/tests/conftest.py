import numpy as np
import pytest

from superl import kernels
from superl.grid import Domain, make_grid


@pytest.fixture(scope="session")
def disk64():
    return make_grid(Domain.disk(1.0), 1 / 64)


@pytest.fixture(scope="session")
def disk32():
    return make_grid(Domain.disk(1.0), 1 / 32)


@pytest.fixture(params=["python", "cython"])
def backend(request):
    before = kernels.BACKEND
    try:
        kernels.use_backend(request.param)
    except ImportError:
        pytest.skip("compiled kernels not built")
    yield request.param
    kernels.use_backend(before)


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
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
