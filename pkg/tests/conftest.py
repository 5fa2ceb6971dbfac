import numpy as np
import pytest

from conesta import Dataset, MaskedVolume, PenaltyWeights, build_operator

_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line; all lines are echoed in the terminal summary."""

    def _report(criterion, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_problem(seed, dims=(3, 3, 3), n=30, weights=(0.05, 0.02, 0.05), signal=1.0,
                 mask=None):
    rng = np.random.default_rng(seed)
    vol = MaskedVolume(dims, mask) if mask is not None else MaskedVolume.full(dims)
    op = build_operator(vol)
    p = vol.p
    X = rng.standard_normal((n, p))
    beta_true = np.zeros(p)
    beta_true[: max(1, p // 3)] = signal
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-X @ beta_true))).astype(np.uint8)
    return Dataset(X, y), op, PenaltyWeights(*weights)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
