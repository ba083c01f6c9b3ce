import numpy as np
import pytest
from hypothesis import strategies as st

from youngpdmp.partitions import YoungDiagram

ACCEPTANCE_LINES = []


def record(number, name, ok, detail=""):
    ACCEPTANCE_LINES.append(f"[{number:>2}] {'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def diagrams(draw, max_size=10):
    n = draw(st.integers(0, max_size))
    rows = []
    remaining = n
    while remaining:
        part = draw(st.integers(1, min(remaining, rows[-1] if rows else remaining)))
        rows.append(part)
        remaining -= part
    return YoungDiagram(tuple(rows))
