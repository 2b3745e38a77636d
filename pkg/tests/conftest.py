from __future__ import annotations

import pytest

from hyperlab.groundstate import ShootingOptions, find_ground_state, solve_ball
from hyperlab.ode import validate_params

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_line(request):
    """Record one ``CRITERION k: PASS/FAIL`` line for the terminal summary."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(k: int, passed: bool, detail: str) -> str:
        line = f"CRITERION {k}: {'PASS' if passed else 'FAIL'} {detail}"
        print(line)
        lines.append((k, line))
        return line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda kv: kv[0]):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref_params():
    return validate_params(3, 3.0, 0.5)


@pytest.fixture(scope="session")
def ref_profile(ref_params):
    return find_ground_state(ref_params)


@pytest.fixture(scope="session")
def ref_profile_fine(ref_params):
    return find_ground_state(ref_params, ShootingOptions(h=0.005))


@pytest.fixture(scope="session")
def ref_profile_long(ref_params):
    return find_ground_state(ref_params, ShootingOptions(T_max=18.0))


@pytest.fixture(scope="session")
def critical_profile():
    return find_ground_state(validate_params(4, 3.0, 2.1))


@pytest.fixture(scope="session")
def two_d_profile():
    return find_ground_state(validate_params(2, 3.0, 0.1))


@pytest.fixture(scope="session")
def ball_profile(ref_params):
    return solve_ball(ref_params, 3.0)
