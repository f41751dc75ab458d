import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from hunter_saxton import InitialProfile  # noqa: E402

CORPUS_SEED = 20240611
CORPUS_SIZE = 24

ACCEPTANCE_LINES: dict[int, str] = {}


def random_profile(rng, max_cells=50, slope_range=5.0):
    n = int(rng.integers(1, max_cells + 1))
    widths = rng.uniform(0.05, 1.0, n)
    start = rng.uniform(-2.0, 2.0)
    bps = start + np.concatenate(([0.0], np.cumsum(widths)))
    slopes = rng.uniform(-slope_range, slope_range, n)
    return InitialProfile(tuple(bps), tuple(slopes), float(rng.uniform(-1.0, 1.0)))


def make_corpus(size=CORPUS_SIZE, seed=CORPUS_SEED):
    rng = np.random.default_rng(seed)
    return [random_profile(rng) for _ in range(size)]


@pytest.fixture(scope="session")
def corpus():
    return make_corpus()


@pytest.fixture
def cusp():
    return InitialProfile((0.0, 1.0), (-2.0,), 0.0)


@pytest.fixture
def two_cell():
    return InitialProfile((-1.0, 0.0, 1.0), (1.0, -1.0), 0.0)


@pytest.fixture
def flat():
    return InitialProfile((0.0, 1.0), (0.0,), 0.0)


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"acceptance {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
