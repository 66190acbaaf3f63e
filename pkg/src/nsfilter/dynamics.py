"""Forward model: dealiased pseudo-spectral vorticity dynamics with ETD4RK stepping.

The vorticity ``w = Laplacian(zeta)`` with ``u = grad_perp(zeta)`` obeys

    dw/dt = -nu a_k w_k + N(w)_k + g_k,    N(w) = -u . grad(w),

where ``a_k = 4 pi^2 |k|^2 / L^2``. The linear (Stokes) part is integrated
exactly and the nonlinear part by the fourth-order exponential Runge-Kutta
scheme of Cox and Matthews.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BlowUpError
from .spectral import SpectralField, WavenumberGrid

_SERIES_TERMS = 30


@dataclass(frozen=True)
class SolverParams:
    grid: WavenumberGrid
    nu: float = 0.01
    dt: float = 0.005
    forcing_index: tuple[int, int] = (5, 5)
    forcing_amplitude: float = 1.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got {self.nu}")
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        self.grid.index(*self.forcing_index)


@dataclass(frozen=True, eq=False)
class EtdTableau:
    """Per-mode coefficient tables of the ETD4RK scheme for one ``(nu, dt, grid)``."""

    E: np.ndarray
    E2: np.ndarray
    Q: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    dt: float = field(default=0.0)


def phi_functions(z, threshold: float = 1.0):
    """``phi_1, phi_2, phi_3`` of real ``z``.

    Closed forms for ``|z| >= threshold``; a Taylor series
    ``phi_k(z) = sum_j z^j / (j+k)!`` below it, where the closed forms cancel.
    """
    z = np.asarray(z, dtype=np.float64)
    small = np.abs(z) < threshold
    zs = np.where(small, z, 0.0)
    phis = []
    for k in (1, 2, 3):
        # Horner evaluation of the truncated series
        acc = np.full(z.shape, 1.0 / math.factorial(_SERIES_TERMS + k - 1))
        for j in range(_SERIES_TERMS - 2, -1, -1):
            acc = acc * zs + 1.0 / math.factorial(j + k)
        phis.append(acc)
    zb = np.where(small, 1.0, z)
    em1 = np.expm1(zb)
    closed = (em1 / zb, (em1 - zb) / zb**2, (em1 - zb - 0.5 * zb**2) / zb**3)
    return tuple(np.where(small, s, c) for s, c in zip(phis, closed))


def build_tableau(params: SolverParams) -> EtdTableau:
    h = params.dt
    z = -params.nu * params.grid.stokes * h
    p1, p2, p3 = phi_functions(z)
    (q1,) = phi_functions(z / 2)[:1]
    tables = dict(
        E=np.exp(z),
        E2=np.exp(z / 2),
        Q=0.5 * h * q1,
        f1=h * (p1 - 3.0 * p2 + 4.0 * p3),
        f2=h * (p2 - 2.0 * p3),
        f3=h * (-p2 + 4.0 * p3),
    )
    for arr in tables.values():
        if not np.isfinite(arr).all():
            raise ValueError("non-finite ETD4RK coefficient table")
        arr.setflags(write=False)
    return EtdTableau(dt=h, **tables)


def curl_forcing(grid: WavenumberGrid, k_f=(5, 5), amplitude: float = 1.0) -> SpectralField:
    """Vorticity forcing ``-Laplacian(psi)`` for ``psi = amplitude * cos(2 pi k_f . x / L)``.

    With ``L = 2`` this is the stream function ``cos(pi k_f . x)``.
    """
    a = grid.stokes[grid.index(*k_f)]
    return SpectralField.from_modes(grid, {tuple(k_f): 0.5 * amplitude * a}, kind="vorticity")


def steps_for(t: float, dt: float) -> int:
    """Number of ``dt`` steps in ``t``; ``t`` must be an integer multiple of ``dt``."""
    k = round(t / dt)
    if k < 0 or abs(k * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not a non-negative integer multiple of dt={dt}")
    return int(k)


class Solver:
    """Owns the tableau, forcing and kernel scratch for one parameter set; not reentrant."""

    def __init__(self, params: SolverParams, backend: str | None = None, forcing: bool = True):
        self.params = params
        self.grid = params.grid
        self.tableau = build_tableau(params)
        amp = params.forcing_amplitude if forcing else 0.0
        self.forcing = curl_forcing(self.grid, params.forcing_index, amp).coeffs
        self.backend = kernels.get_backend(backend)
        self._kernel = self.backend.NonlinearKernel(self.grid.n, self.grid.L)

    def nonlinear(self, w: np.ndarray) -> np.ndarray:
        return self._kernel.evaluate(np.ascontiguousarray(w, dtype=np.complex128))

    def advance(self, w: np.ndarray, nsteps: int) -> np.ndarray:
        """Raw-array stepping; raises :class:`BlowUpError` on non-finite output."""
        if nsteps == 0:
            return np.array(w, dtype=np.complex128)
        tb = self.tableau
        out, bad = self.backend.etd4rk_advance(
            self._kernel, w, int(nsteps), tb.E, tb.E2, tb.Q, tb.f1, tb.f2, tb.f3, self.forcing
        )
        if bad >= 0:
            raise BlowUpError("non-finite state in the forward model", step=int(bad))
        return out

    def step(self, w: SpectralField) -> SpectralField:
        return w.replace(self.advance(w.coeffs, 1))

    def flow(self, w: SpectralField, t: float) -> SpectralField:
        return w.replace(self.advance(w.coeffs, steps_for(t, self.params.dt)))


def nonlinear_term(w: SpectralField, backend: str | None = None) -> SpectralField:
    """``N(w) = -u . grad(w)``, products on the padded grid, truncated back."""
    kern = kernels.get_backend(backend).NonlinearKernel(w.grid.n, w.grid.L)
    return w.replace(kern.evaluate(w.coeffs))


def etd4rk_step(w: SpectralField, params: SolverParams, tableau: EtdTableau | None = None,
                forcing: bool = True) -> SpectralField:
    solver = Solver(params, forcing=forcing)
    if tableau is not None:
        solver.tableau = tableau
    return solver.step(w)


def psi_flow(w0: SpectralField, t: float, params: SolverParams, forcing: bool = True) -> SpectralField:
    """Solution operator ``Psi(w0, t)`` as ``t/dt`` ETD4RK steps."""
    return Solver(params, forcing=forcing).flow(w0, t)
