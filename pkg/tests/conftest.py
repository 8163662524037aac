import functools

import numpy as np
import pytest

from taprcdc.reactor import PRESETS, ReactorConfig, simulate_pulse


@functools.lru_cache(maxsize=None)
def sim(preset: str):
    return simulate_pulse(ReactorConfig(), PRESETS[preset])


@pytest.fixture(scope="session")
def simulate():
    return sim


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_line():
    def emit(line: str):
        ACCEPTANCE_LINES.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
