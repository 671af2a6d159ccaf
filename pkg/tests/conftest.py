import numpy as np
import pytest

from simulwave import _backend


def pytest_report_header(config):
    return f"simulwave kernel backends available: {', '.join(_backend.available())}"


@pytest.fixture(params=_backend.available())
def backend(request):
    """Every kernel-level test runs once per importable backend."""
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
