"""Shared fixtures and hypothesis profiles."""

import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import miesurrogate as ms

settings.register_profile(
    "default", suppress_health_check=[HealthCheck.too_slow], deadline=None)
settings.register_profile("dev", max_examples=15, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def grid():
    return ms.default_grid()


@pytest.fixture(scope="session")
def small_grid():
    return ms.WavenumberGrid.from_range(1000.0, 1254.0, 2.0)  # 128 points


@pytest.fixture(scope="session")
def band_spectrum(grid):
    """Smooth multi-band spectrum used across oracle tests."""
    nu = grid.values
    vals = (1.0 * np.exp(-0.5 * ((nu - 1650) / 16) ** 2)
            + 0.6 * np.exp(-0.5 * ((nu - 1540) / 14) ** 2)
            + 0.4 * np.exp(-0.5 * ((nu - 1240) / 22) ** 2)
            + 0.3 * np.exp(-0.5 * ((nu - 1080) / 18) ** 2))
    return ms.Spectrum(grid, vals)


# -- acceptance bookkeeping: one pass/fail line per criterion ---------------

_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminalreporter(*a, **k):  # pragma: no cover
    pass


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
