import numpy as np
import pytest

from dtnhomog import make_grid

# criterion label -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=_order):
        ok, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}")


def _order(label):
    digits = "".join(c for c in label if c.isdigit())
    return int(digits or 0), label


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_grid():
    return make_grid(1.0, 2 * np.pi, 32, 17)


@pytest.fixture
def grid64():
    return make_grid(1.0, 2 * np.pi, 64, 33)
