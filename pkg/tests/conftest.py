import functools

import pytest
from hypothesis import HealthCheck, settings

from vftsim.lattice import build, empty_vacuum, fig2_pair

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def _fig2(d, n_singular=1):
    return build(fig2_pair(d, n_singular))


@functools.lru_cache(maxsize=None)
def _empty(d, boundary="periodic"):
    return build(empty_vacuum(d, boundary))


@pytest.fixture(scope="session")
def fig2_d3():
    return _fig2(3)


@pytest.fixture(scope="session")
def fig2_d5():
    return _fig2(5)


@pytest.fixture(scope="session")
def vac_d3():
    return _empty(3)


@pytest.fixture(scope="session")
def vac_open_d3():
    return _empty(3, "open")


@pytest.fixture(scope="session")
def lattices():
    return {"fig2_d3": _fig2(3), "fig2_d5": _fig2(5), "vac_d3": _empty(3), "vac_open_d3": _empty(3, "open"),
            "vac_d5": _empty(5)}


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
