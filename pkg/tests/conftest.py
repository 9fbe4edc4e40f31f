from __future__ import annotations

import logging
import time

import numpy as np
import pytest

from pricesignal.equilibrium import Profile, find_equilibria, guessed_equilibrium
from pricesignal.market import c1, random_valid_params
from pricesignal.variants import observable_equilibria

_AC_LINES: list[str] = []
TIMINGS: dict[str, float] = {}


@pytest.fixture(autouse=True)
def _quiet_search_logs(caplog):
    caplog.set_level(logging.ERROR, logger="pricesignal")


@pytest.fixture(scope="session")
def C1():
    return c1()


@pytest.fixture(scope="session")
def guess(C1):
    return guessed_equilibrium(C1)


@pytest.fixture(scope="session")
def pooling21(C1):
    return Profile.symmetric_pure(C1, 21, 21, 0.0)


@pytest.fixture(scope="session")
def c1_certificates(C1):
    """Full symmetric pure search on C1 (about half a minute, shared by every module)."""
    t0 = time.perf_counter()
    certs = find_equilibria(C1)
    TIMINGS["c1_search"] = time.perf_counter() - t0
    return certs


@pytest.fixture(scope="session")
def c1_observable(C1):
    """Observable-types search over the full C1 price grid (under a minute)."""
    t0 = time.perf_counter()
    res = observable_equilibria(C1)
    TIMINGS["c1_observable"] = time.perf_counter() - t0
    return res


@pytest.fixture(scope="session")
def random_params():
    """Ten valid random markets on coarse grids, fixed seed."""
    rng = np.random.default_rng(20261016)
    return [random_valid_params(rng, max_N=120) for _ in range(10)]


@pytest.fixture(scope="session")
def timings():
    return TIMINGS


@pytest.fixture(scope="session")
def ac_report():
    def record(name: str, ok: bool, detail: str = "") -> None:
        _AC_LINES.append(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip())
        print(_AC_LINES[-1])

    return record


def pytest_terminal_summary(terminalreporter):
    if _AC_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_AC_LINES, key=lambda s: int(s.split(":")[0].split("-")[1])):
            terminalreporter.write_line(line)

