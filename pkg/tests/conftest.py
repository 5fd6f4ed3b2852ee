import numpy as np
import pytest

from disentangler.clifford import enumerate_clifford_2q


@pytest.fixture(scope="session")
def table():
    return enumerate_clifford_2q()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import CRITERIA

    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
