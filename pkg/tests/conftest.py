import numpy as np
import pytest

from nsfilter.dynamics import Solver, SolverParams
from nsfilter.observations import complex_gaussian, stream_rng
from nsfilter.spectral import SpectralField, make_grid


def random_field(grid, seed, kmax=None, amplitude=1.0, spectrum=0.0):
    """Seeded reality-symmetric vorticity with ``E|w_k|^2 ~ amplitude^2 |k|^(-spectrum)``."""
    rng = stream_rng(seed, 99)
    var = np.zeros(grid.shape)
    a = grid.active if kmax is None else grid.active & (grid.ksq <= kmax**2)
    var[a] = amplitude**2 * grid.ksq[a] ** (-spectrum)
    return SpectralField(grid, complex_gaussian(rng, grid, var), "vorticity")


@pytest.fixture(scope="session")
def grid32():
    return make_grid(32, 2.0)


@pytest.fixture(scope="session")
def grid8():
    return make_grid(8, 2.0)


@pytest.fixture(scope="session")
def solver32(grid32):
    return Solver(SolverParams(grid32))


@pytest.fixture(scope="session")
def attractor_state(solver32):
    """A state after a short integration from random data (developed but cheap)."""
    w0 = random_field(solver32.grid, 7, kmax=8, amplitude=2.0)
    return w0.replace(solver32.advance(w0.coeffs, 2000))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
