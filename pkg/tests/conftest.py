from pathlib import Path

import pytest

from cfpopt import _kernels

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT-compile the sweep kernels once so timed tests measure the algorithms
    _kernels.warmup()


@pytest.fixture
def fixtures_dir():
    return FIXTURES
