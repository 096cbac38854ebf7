import math

import numpy as np
import pytest

from mesoepr.gaussian import sample, two_mode_squeezed

TMSS_R1_VAR = 1.0 / math.cosh(2.0)  # 0.26580...


@pytest.fixture(scope="session")
def tmss_r1_samples():
    """10**6 quadrature vectors of the r=1 two-mode squeezed state."""
    return sample(two_mode_squeezed(1.0), 10**6, seed=20240601)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)
