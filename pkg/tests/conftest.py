import numpy as np
import pytest

from nematicflow import MaterialParams, SimState, SpectralGrid
from nematicflow.spectral_domain import random_band_limited

FULL = dict(a=-0.2, b=1.0, c=1.0, L1=1.0, L2=0.5, L3=0.5, L4=0.3)


@pytest.fixture(scope="session")
def grid16():
    return SpectralGrid(16)


@pytest.fixture(scope="session")
def grid12():
    return SpectralGrid(12)


@pytest.fixture
def full_params():
    return MaterialParams(**FULL)


def random_state(grid, seed, u_amp=0.5, q_amp=0.3, decay=2.0):
    u = random_band_limited(grid, "vector", decay, seed, solenoidal=True, amplitude=u_amp)
    Q = random_band_limited(grid, "qtensor", decay, seed + 1, amplitude=q_amp)
    return SimState.from_physical(grid, u, Q)


def single_mode(grid, mode=(1, 0, 0), component=1, amplitude=0.1):
    """sin(k.x) in one stored component; returns (Q, k)."""
    x = grid.x
    s = 2 * np.pi / grid.box_length
    k = s * np.asarray(mode, dtype=float)
    Q = np.zeros((5,) + grid.shape)
    Q[component] = amplitude * np.sin(k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
    return Q, k


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
