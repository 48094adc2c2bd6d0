import warnings

import pytest

from hybridcavity.errors import BistableWarning
from hybridcavity.params import PhysicalConfig, derive_params
from hybridcavity.steady_state import solve_steady_state


@pytest.fixture(scope="session")
def cfg():
    return PhysicalConfig()


@pytest.fixture(scope="session")
def dp(cfg):
    return derive_params(cfg)


@pytest.fixture(scope="session")
def steady(dp):
    return solve_steady_state(dp)


def solved(cfg):
    dp = derive_params(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BistableWarning)
        return dp, solve_steady_state(dp)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number].summary())
