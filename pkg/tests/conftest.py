import math

import pytest

from hardycone import geometry
from hardycone.cone_profile import solve_lambda
from hardycone.params import ProblemParams

# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def laplace_pi_profile():
    return solve_lambda(math.pi, ProblemParams(2, 2.0))


@pytest.fixture(scope="session")
def laplace_3pi4_profile():
    return solve_lambda(3 * math.pi / 4, ProblemParams(2, 2.0))


@pytest.fixture(scope="session")
def halfspace_profile():
    return solve_lambda(math.pi / 2, ProblemParams(2, 2.0))


@pytest.fixture(scope="session")
def square_128():
    return geometry.build_grid(geometry.unit_square(), 1 / 128)


@pytest.fixture(scope="session")
def disk_128():
    return geometry.build_grid(geometry.unit_disk(), 1 / 128)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE, key=lambda k: (int(str(k).split()[0]), str(k))):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
