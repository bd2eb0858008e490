from pathlib import Path

import numpy as np
import pytest

from funnelcbf.funnel import default_grid, exponential_funnel, usv_reference

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

_ACCEPTANCE_LINES = []


def record_acceptance(number, title, passed, detail=""):
    _ACCEPTANCE_LINES.append(f"[criterion {number}] {'PASS' if passed else 'FAIL'} {title}" + (f" :: {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance():
    return record_acceptance


@pytest.fixture(scope="session")
def usv_grid():
    return default_grid(0.0, 10.0)


@pytest.fixture(scope="session")
def bench_funnel(usv_grid):
    return exponential_funnel(1.3, 2.0, 0.2, 2.0, usv_grid)


@pytest.fixture(scope="session")
def usv_ref(usv_grid):
    return usv_reference(usv_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
