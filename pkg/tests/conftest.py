import numpy as np
import pytest

ACCEPTANCE = []


def record(criterion, passed, detail=""):
    ACCEPTANCE.append((criterion, bool(passed), detail))
    print(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def line4():
    """The 1-D points {0, 1, 10, 11} used throughout the hand-derived examples."""
    return np.array([[0.0], [1.0], [10.0], [11.0]])
