import numpy as np
import pytest

from seldoor.graph import Admg
from seldoor.sem import SemModel


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def chain():
    return Admg(["X1", "X2", "X3"], [("X1", "X2"), ("X2", "X3")])


@pytest.fixture
def chain_model(chain):
    return SemModel.from_params(
        chain, {("X1", "X2"): 0.5, ("X2", "X3"): 2.0}, {"X1": 1.0, "X2": 1.0, "X3": 1.0}
    )


@pytest.fixture
def worked():
    """X -> M1 -> Y with M1 -> M2."""
    return Admg(["X", "M1", "Y", "M2"], [("X", "M1"), ("M1", "Y"), ("M1", "M2")])


@pytest.fixture
def worked_model(worked):
    coefs = {e: 1.0 for e in [("X", "M1"), ("M1", "Y"), ("M1", "M2")]}
    return SemModel.from_params(worked, coefs, {v: 1.0 for v in worked.names})


@pytest.fixture
def two_mediators():
    """X -> M1, X -> M2, M1 -> M2, M1 -> Y, M2 -> Y."""
    return Admg(
        ["X", "M1", "M2", "Y"],
        [("X", "M1"), ("X", "M2"), ("M1", "M2"), ("M1", "Y"), ("M2", "Y")],
    )


@pytest.fixture
def two_mediators_model(two_mediators):
    coefs = {
        ("X", "M1"): 0.7,
        ("X", "M2"): -0.4,
        ("M1", "M2"): 1.3,
        ("M1", "Y"): 0.9,
        ("M2", "Y"): 0.6,
    }
    return SemModel.from_params(
        two_mediators, coefs, {"X": 1.0, "M1": 0.8, "M2": 1.5, "Y": 1.2}
    )


@pytest.fixture
def confounder():
    return Admg(["C", "X", "Y"], [("C", "X"), ("C", "Y"), ("X", "Y")])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES
