import numpy as np
import pytest

from tempembed.graph_store import TemporalGraph, bin_snapshots


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_series():
    """6 nodes, edges spread over 3 snapshots (one bin per timestamp)."""
    src = [0, 1, 2, 3, 0, 4, 1]
    dst = [1, 2, 3, 4, 2, 5, 2]
    ts = [0, 0, 1, 1, 2, 2, 2]
    return bin_snapshots(TemporalGraph(6, src, dst, ts), "index")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for the acceptance summary, then assert."""

    def check(name: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
