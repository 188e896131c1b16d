import sys

import pytest


@pytest.fixture
def fast_switching():
    """Shrink the interpreter's thread switch interval so free-running
    stress tests actually interleave at fine grain."""
    old = sys.getswitchinterval()
    sys.setswitchinterval(1e-5)
    yield
    sys.setswitchinterval(old)
