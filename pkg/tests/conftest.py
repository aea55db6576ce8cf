import numpy as np
import pytest

from semiscat.fields import HerglotzDensity
from semiscat.geometry import build_directions, build_disk_grid
from semiscat.specfun import WaveContext


def bump(grid, center, width):
    c = np.zeros(grid.d)
    c[: len(center)] = center
    return np.exp(-np.sum((grid.nodes - c) ** 2, axis=1) / width ** 2)


def random_density(dirs, seed, sup):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(len(dirs)) + 1j * rng.standard_normal(len(dirs))
    return HerglotzDensity(dirs, sup * v / np.max(np.abs(v)))


@pytest.fixture(scope="session")
def ctx2():
    return WaveContext(3.0, 2)


@pytest.fixture(scope="session")
def grid24():
    return build_disk_grid(1.0, 24, 2)


@pytest.fixture(scope="session")
def dirs16():
    return build_directions(16, 2)


@pytest.fixture(scope="session")
def obs32():
    return build_directions(32, 2)


# acceptance verdicts, printed as one line per criterion at the end of the run
ACCEPTANCE = {}


def record_criterion(number, title, passed, detail):
    ACCEPTANCE[number] = f"{'PASS' if passed else 'FAIL'} criterion {number:>2} ({title}): {detail}"
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
