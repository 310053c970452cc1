import numpy as np
import pytest

from stackelberg_fo.core import (FollowerCost, LeaderObjective, SmoothnessConstants,
                                 StackelbergProblem)
from stackelberg_fo.problems import CATALOG_NAMES, get_entry


@pytest.fixture(scope="session")
def sq2_entry():
    return get_entry("sq2")


@pytest.fixture(scope="session")
def sq2(sq2_entry):
    return sq2_entry.problem


@pytest.fixture(scope="session")
def sq2_spec(sq2_entry):
    return sq2_entry.spec


@pytest.fixture(scope="session")
def entries():
    return {name: get_entry(name) for name in CATALOG_NAMES}


def decoupled_problem(x_star=0.7, y_star=(0.2, -0.4)):
    """Followers ignore the leader and the leader's cost is separable."""
    ys = np.asarray(y_star, dtype=float)
    leader = LeaderObjective(
        value=lambda x, y: 0.5 * float((x[0] - x_star) ** 2) + 0.5 * float(y @ y),
        grad_x=lambda x, y: np.array([x[0] - x_star]),
        grad_y=lambda x, y: np.array(y, dtype=float))
    followers = [FollowerCost(i,
                              value=lambda x, y, i=i: 0.5 * float((y[i] - ys[i]) ** 2),
                              grad_x=lambda x, y: np.zeros(1),
                              grad_own=lambda x, y, i=i: np.array([y[i] - ys[i]]))
                 for i in range(len(ys))]
    consts = SmoothnessConstants(mu_g=1.0, ell_f0=2.0, ell_f1=1.0, ell_g0=1.0, ell_g1=1.0)
    return StackelbergProblem(leader, followers, 1, (1,) * len(ys), consts, name="decoupled")


_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record and print one verdict line per acceptance criterion."""
    def record(number, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        _CRITERIA[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
