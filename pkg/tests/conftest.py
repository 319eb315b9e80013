from pathlib import Path

import numpy as np
import pytest

from sublinear_lab.credal_core import Marginal, Sequence

DATA = Path(__file__).parent / "data"

_criteria = []


@pytest.fixture
def record_criterion():
    """Register a one-line acceptance verdict, printed in the terminal summary."""
    def record(number, ok, detail):
        _criteria.append(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in _criteria:
            terminalreporter.write_line(line)


@pytest.fixture
def coin_a():
    return Marginal([-1.0, 1.0], [[0.7, 0.3], [0.3, 0.7]], "A")


@pytest.fixture
def fair_coin():
    return Marginal([-1.0, 1.0], [[0.5, 0.5]], "fair")


@pytest.fixture
def tri_b():
    return Marginal([[0, 0], [1, 0], [0, 1]], np.eye(3), "B")


@pytest.fixture
def seq_a2(coin_a):
    return Sequence.iid(coin_a, 2)
