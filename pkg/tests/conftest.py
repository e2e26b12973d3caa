import math

import pytest

from delaylab.blowup import RunRequest
from delaylab.branches import origin_branch_point
from delaylab.integrator import IntegratorOptions


@pytest.fixture(scope="session")
def opts():
    return IntegratorOptions()


@pytest.fixture(scope="session")
def big_delta_polar(opts):
    """Constructed-history run at delta=100, tau=1 in polar form."""
    return RunRequest(1.0, 100.0, form="polar").run(opts)


@pytest.fixture(scope="session")
def delta5_runs(opts):
    cart = RunRequest(1.0, 5.0, form="cartesian").run(opts)
    pol = RunRequest(1.0, 5.0, form="polar").run(opts)
    return cart, pol


@pytest.fixture(scope="session")
def origin_point():
    return origin_branch_point(0.2)


def wrap_angle(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        title, status, dt, budget = RESULTS[num]
        took = "not finished" if dt is None else f"{dt:.3f} s of {budget:g} s"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {title} ({took})")
