import math

import numpy as np
import pytest

import magspec as ms

TWO_PI = 2 * math.pi


@pytest.fixture(scope="session")
def circle512():
    return ms.circle_grid(TWO_PI, 512)


@pytest.fixture(scope="session")
def torus32():
    return ms.torus_grid(TWO_PI, TWO_PI, 32, 32)


@pytest.fixture(scope="session")
def sphere3():
    return ms.icosphere(3)


@pytest.fixture(scope="session")
def sphere4():
    return ms.icosphere(4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_gauge(M, rng):
    return ms.GaugeFunction(rng.uniform(-math.pi, math.pi, M.n_vertices))


ACCEPTANCE = {}


@pytest.fixture
def acceptance(request):
    """Record ``(passed, detail)`` for one acceptance criterion; printed in the summary."""
    def record(number, title, passed, detail):
        ACCEPTANCE[number] = (bool(passed), title, detail)
        print(f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}: {title} ({detail})")
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{number:>2}] {'PASS' if passed else 'FAIL'}  {title}: {detail}")
