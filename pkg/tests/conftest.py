import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from n3l import tensor as T
from n3l.grid import GridConfig

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def configs(draw, min_n=1, max_n=7, max_points=None):
    """Arbitrary (not necessarily valid) point sets."""
    n = draw(st.integers(min_n, max_n))
    cells = draw(st.lists(st.integers(0, n * n - 1), unique=True,
                          max_size=max_points if max_points is not None else n * n))
    return GridConfig(n, [(t // n, t % n) for t in cells])


@pytest.fixture
def float64():
    T.set_default_dtype(np.float64)
    yield
    T.set_default_dtype(np.float64)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
