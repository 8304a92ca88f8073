import numpy as np
import pytest

from cuesample.models import TwoCueModel

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def exp1_model():
    return TwoCueModel(prior_c1=0.5, sigma_s=4.0, sigma_1=6.0, sigma_2=6.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
