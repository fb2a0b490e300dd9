import numpy as np
import pytest

from nsextremes import cases

ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    """Remember one acceptance outcome for the end-of-run summary."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def case1_sample():
    return cases.simulate_sample(cases.builtin_case("case1"), np.random.default_rng(7), fixed_n=1000)


def small_case1(n, seed):
    return cases.simulate_sample(cases.builtin_case("case1"), np.random.default_rng(seed), fixed_n=n)
