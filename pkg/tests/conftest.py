from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from nlar_lse.kernels import available_backends

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

BACKENDS = available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record the one-line outcome of an acceptance criterion."""
    def record(number: int, name: str, passed: bool, detail: str = ""):
        _CRITERIA[number] = f"criterion {number} [{name}]: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        print(_CRITERIA[number])
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
