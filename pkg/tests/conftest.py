"""Shared fixtures.  Expensive searches are computed once per session."""
import math

import pytest

from bicgrate.bound_states import find_below, find_continuum_I, find_continuum_II
from bicgrate.lattice_sums import ArrayConfig
from bicgrate.scattering import linearize_bic

ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    """Record one PASS/FAIL line for the acceptance summary."""
    line = "criterion %2d: %s  %s" % (criterion, "PASS" if ok else "FAIL", detail)
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def base_cfg():
    return ArrayConfig(0.1, 1.5)


@pytest.fixture(scope="session")
def below_records():
    return find_below(ArrayConfig(0.1, 1.5, 0.0, 1.0), math.pi)


@pytest.fixture(scope="session")
def c1_records(base_cfg):
    """One open channel at kx = 0, a = 0, n = 1..4."""
    return find_continuum_I(base_cfg, 0.0, 0.0, 4)


@pytest.fixture(scope="session")
def c2_records_a0(base_cfg):
    return find_continuum_II(base_cfg, 0.0, 3, 5)


@pytest.fixture(scope="session")
def c2_records_a_half(base_cfg):
    return find_continuum_II(base_cfg, 0.5, 3, 5)


@pytest.fixture(scope="session")
def bic_linearization(base_cfg):
    """n = 1 bound state of the psi_+ family at kx = pi/5."""
    return linearize_bic(base_cfg, math.pi / 5, 1)
