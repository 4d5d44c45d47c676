import numpy as np
import pytest

from coagfrag.state_space import States
from coagfrag.stochastics import StreamKey, uniform_box


@pytest.fixture
def key():
    return StreamKey(1234, "tests")


@pytest.fixture
def pairs(key):
    rng = key.generator()
    return uniform_box(rng, 2000, 4.0), uniform_box(rng, 2000, 4.0)


def one(m, p, e) -> States:
    return States(np.array([m], dtype=float), np.array([p], dtype=float), np.array([e], dtype=float))


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def record(n: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(passed), detail)
    print(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
