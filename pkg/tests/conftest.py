import math

import numpy as np
import pytest

from frachill.config import RunConfig


def small_config(**changes) -> RunConfig:
    """Coarse 1-D Neumann run that finishes in well under a second."""
    base = dict(n_x=32, h=1e-3, n_steps=10, alpha=1e-2, sigma=0.5, lam=1e-3)
    base.update(changes)
    return RunConfig(**base)


@pytest.fixture
def small_problem():
    return small_config().build()


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


def relerr(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


REPO = __import__("pathlib").Path(__file__).resolve().parents[1]
TWO_PI = 2 * math.pi


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
