import numpy as np
import pytest

from dichovalue.game import table_game


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_table(rng, n):
    return rng.uniform(-1.0, 1.0, 1 << n)


def random_game(rng, n):
    return table_game(random_table(rng, n))


def pytest_terminal_summary(terminalreporter):
    lines = [
        value
        for key in ("passed", "failed")
        for report in terminalreporter.stats.get(key, [])
        if report.when == "call"
        for name, value in report.user_properties
        if name == "acceptance"
    ]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
