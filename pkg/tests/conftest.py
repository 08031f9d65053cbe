import numpy as np
import pytest

from grazingmodes import CrossSection, GridConfig


@pytest.fixture(scope="session")
def grid2():
    return GridConfig(2)


@pytest.fixture(scope="session")
def grid4():
    return GridConfig(4)


@pytest.fixture(scope="session")
def cutoff():
    return CrossSection.cutoff(0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_pairs(N, count, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(-N, N + 1, size=(count, 2, 3))


@pytest.fixture(autouse=True)
def _reset_mpmath_precision():
    import mpmath

    dps = mpmath.mp.dps
    yield
    mpmath.mp.dps = dps


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    report = getattr(mod, "REPORT", None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(report):
        terminalreporter.write_line(report[n])
