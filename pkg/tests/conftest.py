import numpy as np
import pytest

from staug.series import WindowPair


def two_tone(L=512, slope=0.0):
    t = np.arange(L, dtype=float)
    hi = np.sin(2 * np.pi * 0.4 * t)
    lo = np.sin(2 * np.pi * 0.05 * t)
    return hi + lo + slope * t, hi, lo


def corr(a, b):
    return float(np.corrcoef(a, b)[0, 1])


@pytest.fixture
def two_tone_window():
    """One-channel window holding the two-tone + ramp signal, split at 256."""
    x, _, _ = two_tone(512, 0.002)
    return WindowPair(x[None, :256], x[None, 256:], 0)


@pytest.fixture
def ramp_tone_window():
    t = np.arange(192, dtype=float)
    ramp = t / 100
    tone = np.sin(2 * np.pi * 0.1 * t)
    vals = np.vstack([ramp, tone])
    return WindowPair(vals[:, :96], vals[:, 96:], 0)


# acceptance criteria register (number, title, passed, detail) here
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, passed, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {num:>2}. {title}: {detail}")
