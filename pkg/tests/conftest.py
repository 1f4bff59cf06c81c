import numpy as np
import pytest

from crnoma.netmodel import NetworkConfig, equally_spaced

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def det2():
    return NetworkConfig(primary_positions=((0.0, 1.0), (0.0, 1000.0)))


@pytest.fixture
def m10():
    return NetworkConfig(primary_positions=equally_spaced((1.0, 0.0), (1000.0, 0.0), 10))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
