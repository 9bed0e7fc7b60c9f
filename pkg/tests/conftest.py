import random

import pytest

from abeacs.pairing import BENCH_PRIME, TEST_PRIME, exponent_params

GOLDEN_POLICY = "(SA_1 OR ObA_1) AND (SA_2 OR ObA_2) AND (SA_3 OR ObA_3)"
GOLDEN_ROWS = [[3, 3, 9, 13, 19], [1, 2, 9, 9, 0], [1, 2, 13, 13, 0], [1, 2, 19, 19, 0]]


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture(scope="session")
def small():
    return exponent_params(TEST_PRIME)


@pytest.fixture(scope="session")
def big():
    return exponent_params(BENCH_PRIME)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record and print one pass/fail line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(line)
        _VERDICTS.append((number, line))
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
