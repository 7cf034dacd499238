import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from fdrecon.fdcore import FunctionalSample, Grid  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def partial_samples(draw, max_n=8, min_n=2, min_T=2, max_T=12, ties=True, full=False):
    """Small samples with random masks; integer-valued draws make ties common."""
    n = draw(st.integers(min_n, max_n))
    T = draw(st.integers(min_T, max_T))
    if ties:
        vals = draw(st.lists(st.integers(-3, 3), min_size=n * T, max_size=n * T))
        vals = np.array(vals, dtype=float).reshape(n, T)
    else:
        vals = np.array(draw(st.lists(st.floats(-5, 5, allow_nan=False, width=32),
                                      min_size=n * T, max_size=n * T)), dtype=float).reshape(n, T)
    if full:
        mask = np.ones((n, T), dtype=bool)
    else:
        mask = np.array(draw(st.lists(st.booleans(), min_size=n * T, max_size=n * T))).reshape(n, T)
    return FunctionalSample(Grid.uniform(T), np.where(mask, vals, np.nan), mask)


def constant_sample(levels, T=11, masks=None):
    grid = Grid.uniform(T)
    vals = np.repeat(np.asarray(levels, dtype=float)[:, None], T, axis=1)
    mask = np.ones_like(vals, dtype=bool) if masks is None else np.asarray(masks, dtype=bool)
    return FunctionalSample(grid, np.where(mask, vals, np.nan), mask)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
