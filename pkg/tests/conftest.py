import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fraplace import assemble_kernel, build_grid  # noqa: E402


@pytest.fixture(scope="session")
def grid64():
    return build_grid(0.0, 1.0, 64)


@pytest.fixture(scope="session")
def kernel64(grid64):
    return assemble_kernel(grid64, 0.5, 2.0)
