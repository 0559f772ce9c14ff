import numpy as np
import pytest

from sltm.array_model import ArrayGeometry

CRITERIA: dict[int, tuple[bool, str]] = {}


def record(number: int, ok: bool, detail: str):
    CRITERIA[number] = (bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}")


@pytest.fixture
def geom8():
    return ArrayGeometry(8, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
