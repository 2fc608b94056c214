import math

import pytest
from hypothesis import settings

from reflectlab.gas import GasConstants
from reflectlab.linsolve import assemble_linearized, grid_for
from reflectlab.reflection import base_trivial_rr

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("default")

GAMMAS = (1.2, 1.4, 5.0 / 3.0)


@pytest.fixture(scope="session")
def gas():
    return GasConstants(1.4)


@pytest.fixture(scope="session")
def base():
    return base_trivial_rr()


@pytest.fixture(scope="session")
def system20(base):
    return assemble_linearized(base, grid_for(base, 20))


@pytest.fixture(scope="session")
def base_params(base):
    return base.params()


def deg(x):
    return math.radians(x)


_SYSTEMS = {}


def kernel_at(n):
    """(system, kernel field) on the base configuration, cached across test files."""
    if n not in _SYSTEMS:
        from reflectlab.linsolve import kernel_compute

        trr = base_trivial_rr()
        system = assemble_linearized(trr, grid_for(trr, n))
        _SYSTEMS[n] = (system, kernel_compute(system))
    return _SYSTEMS[n]


ACCEPTANCE = {}


def record(number, title, ok, detail):
    """Store and print one pass/fail line for an acceptance criterion."""
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
