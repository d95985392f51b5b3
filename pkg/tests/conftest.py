"""Shared, session-cached solves: each canonical sweep runs once per test session."""

import numpy as np
import pytest
from hypothesis import settings

from segregation.asymptotics import run_sweep
from segregation.experiment import preset_config
from segregation.profile import default_profile

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def profile():
    return default_profile()


@pytest.fixture(scope="session")
def sym1d_config():
    return preset_config("1d-symmetric-2comp", schedule={"stop": 2.0**18})


@pytest.fixture(scope="session")
def sym1d_sweep(sym1d_config, profile):
    return run_sweep(sym1d_config, keep_fields=True, profile=profile)


@pytest.fixture(scope="session")
def three_comp_sweep(profile):
    return run_sweep(preset_config("1d-3comp"), profile=profile)


@pytest.fixture(scope="session")
def tilted_config():
    return preset_config("2d-tilted-2comp")


@pytest.fixture(scope="session")
def tilted_sweep(tilted_config, profile):
    return run_sweep(tilted_config, keep_fields=True, profile=profile)


@pytest.fixture(scope="session")
def cross_config():
    return preset_config("2d-cross-4comp")


@pytest.fixture(scope="session")
def cross_sweep(cross_config):
    return run_sweep(cross_config, keep_fields=True)


def record_at(records, beta):
    for r in records:
        if r.beta == beta:
            return r
    raise KeyError(beta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
