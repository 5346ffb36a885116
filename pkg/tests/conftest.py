import numpy as np
import pytest

from radarqa.core import RadarFrame

_ACCEPTANCE_LINES: list[str] = []

# Observed precipitation in the top two rows; the forecast keeps six of those
# eight pixels and adds two below: H=6, M=2, F=2, C=6.
FIXTURE_GT = np.array([
    [100, 100, 100, 100],
    [100, 100, 100, 100],
    [0, 0, 0, 0],
    [0, 0, 0, 0],
], dtype=np.uint8)
FIXTURE_PRED = np.array([
    [100, 100, 100, 100],
    [100, 100, 0, 0],
    [100, 100, 0, 0],
    [0, 0, 0, 0],
], dtype=np.uint8)


@pytest.fixture
def fixture_pair():
    return RadarFrame(FIXTURE_PRED), RadarFrame(FIXTURE_GT)


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, asserted on the spot."""

    def record(label: str, ok: bool, detail: str = "") -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
