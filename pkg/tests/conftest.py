"""Session-wide fixtures: the built-in maps and their pipeline results."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from endtrack.fixtures import fixture  # noqa: E402
from endtrack.traintrack import to_relative_train_track  # noqa: E402


@pytest.fixture(scope="session")
def L():
    return fixture("ladder-shift-tau")


@pytest.fixture(scope="session")
def S():
    return fixture("ladder-shift")


@pytest.fixture(scope="session")
def F():
    return fixture("fib-ray")


@pytest.fixture(scope="session")
def L_rtt(L):
    return to_relative_train_track(L)


@pytest.fixture(scope="session")
def F_rtt(F):
    return to_relative_train_track(F)


@pytest.fixture(scope="session")
def S_rtt(S):
    return to_relative_train_track(S)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
