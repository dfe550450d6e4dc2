import numpy as np
import pytest

from adaptsg.models import DiffusionModel, LotkaVolterraModel


@pytest.fixture(scope="session")
def diffusion():
    return DiffusionModel()


@pytest.fixture(scope="session")
def lotka_volterra():
    return LotkaVolterraModel()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, config):
    from test_acceptance import ACCEPTANCE_LINES

    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
