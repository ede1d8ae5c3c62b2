import numpy as np
import pytest

from dvkinetic.fields import Field, Grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def positive_fields(rng, grid, ncomp, lo=0.2, hi=2.0):
    return [Field(grid, rng.uniform(lo, hi, grid.shape)) for _ in range(ncomp)]


# One PASS/FAIL line per acceptance check, printed after the test session.
def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def verdict(request):
    lines = request.config._acceptance_lines

    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
