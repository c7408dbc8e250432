import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sectionlab import bessel


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    # pay the jit cost once, before any timed assertions
    bessel.warmup()
