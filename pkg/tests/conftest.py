import numpy as np
import pytest

from mclab.dynamics import make_kan_cylinder, make_map

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(k: int, passed: bool, detail: str):
    ACCEPTANCE[k] = (bool(passed), detail)
    return passed


@pytest.fixture(scope="session")
def kan():
    return make_kan_cylinder(3, 0.5)


@pytest.fixture(scope="session")
def torus():
    return make_map("kan_torus", 3, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        tr.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
