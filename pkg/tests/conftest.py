import math

import numpy as np
import pytest

from bcmtrend.core import ModelParams
from bcmtrend.simulation import Snapshot


def alpha0_for(alpha1, cum_rate=1.5, horizon=2.0):
    """Intercept with control cumulative rate ``cum_rate`` at ``horizon`` (test-side formula)."""
    if alpha1 == 0:
        return math.log(cum_rate / horizon)
    return math.log(cum_rate * alpha1 / math.expm1(alpha1 * horizon))


@pytest.fixture
def reference_params():
    """Simulation-study truth at alpha1 = -1 under the alternative 0.5."""
    return ModelParams(alpha0_for(-1.0), -1.0, math.log(0.5), 1.25)


@pytest.fixture
def fixture_snapshot():
    """Three-subject unblinded snapshot used by the term-by-term oracles."""
    return Snapshot(
        exposure=np.array([1.5, 0.7, 2.0]),
        event_times=(np.array([0.2, 0.9, 1.4]), np.array([]), np.array([0.05, 1.1])),
        group=np.array([1.0, 0.0, 0.0]),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
