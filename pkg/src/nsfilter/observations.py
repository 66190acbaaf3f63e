"""Truth trajectories and the observation model ``y_j = P_lambda u_j + xi_j``.

Noise ``xi ~ N(0, Gamma)`` with ``Gamma = sigma^2 A0^(-2 beta)`` on the observed
modes. ``Gamma`` is diagonal in the Fourier basis; its eigenvalues ``g_k`` are
variances of the coefficients measured in the model's observation ``units``
(velocity amplitudes by default), converted to vorticity coefficients on the
way into the state.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Solver, steps_for
from .errors import SchemaError
from .spectral import (
    SpectralField,
    WavenumberGrid,
    coeffs_from_rows,
    flip,
    half_lattice,
    make_grid,
    p_lambda,
)

# independent RNG streams keyed off the user seeds
STREAM_SPINUP = 0
STREAM_NOISE = 1
STREAM_OU = 2


def stream_rng(seed: int, stream: int, *index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), stream, *index])))


def complex_gaussian(rng: np.random.Generator, grid: WavenumberGrid, variance: np.ndarray) -> np.ndarray:
    """Reality-symmetric field with ``E|c_k|^2 = variance_k`` (real and imaginary parts each ``variance_k/2``)."""
    z = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    z *= np.sqrt(0.5 * variance)
    c = (z + np.conj(flip(z))) / math.sqrt(2.0)
    c[~grid.active] = 0.0
    return c


@dataclass(frozen=True, eq=False)
class NoiseModel:
    grid: WavenumberGrid
    sigma: float
    beta: float = 0.0
    lam: float = math.inf
    seed: int = 0
    ell: float | None = None
    units: str = "velocity"
    variance: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        self.grid.unit_scale(self.units)
        mask = self.grid.observed_mask(self.lam)
        mu = self.grid.mu(self.ell)
        g = np.zeros(self.grid.shape)
        g[mask] = self.sigma**2 * mu[mask] ** (-2.0 * self.beta)
        if not np.isfinite(g).all():
            raise ValueError("non-finite noise variance on the retained band")
        g.setflags(write=False)
        object.__setattr__(self, "variance", g)

    @property
    def observed(self) -> np.ndarray:
        return self.grid.observed_mask(self.lam)

    @property
    def trace(self) -> float:
        """``tr(Gamma) = E|xi|^2``, summed over every lattice position (both members of a conjugate pair)."""
        return float(self.variance.sum())

    def rng(self, step: int) -> np.random.Generator:
        return stream_rng(self.seed, STREAM_NOISE, step)


@dataclass(frozen=True, eq=False)
class Observation:
    step: int
    y: SpectralField
    xi: SpectralField


def draw_noise(model: NoiseModel, step: int = 0, rng: np.random.Generator | None = None) -> SpectralField:
    """One noise realization as a vorticity field supported on the observed modes.

    Without an explicit ``rng`` the draw depends only on ``(model.seed, step)``.
    """
    if rng is None:
        rng = model.rng(step)
    eta = complex_gaussian(rng, model.grid, model.variance)
    return SpectralField(model.grid, eta * model.grid.unit_scale(model.units), "vorticity")


def observe(u: SpectralField, model: NoiseModel, step: int = 0) -> Observation:
    xi = draw_noise(model, step)
    y = p_lambda(u, model.lam).coeffs + xi.coeffs
    return Observation(step, SpectralField(u.grid, y, "vorticity"), xi)


def random_initial_state(grid: WavenumberGrid, seed: int, amplitude: float = 2.0, kmax: float = 8.0) -> SpectralField:
    """Seeded vorticity with i.i.d. complex Gaussian modes of std ``amplitude`` on ``|k| <= kmax``."""
    rng = stream_rng(seed, STREAM_SPINUP)
    var = np.where(grid.active & (grid.ksq <= kmax**2), amplitude**2, 0.0)
    return SpectralField(grid, complex_gaussian(rng, grid, var), "vorticity")


def spin_up(seed: int, t_spin: float, solver: Solver, amplitude: float = 2.0, kmax: float = 8.0) -> SpectralField:
    """Integrate a seeded random state for ``t_spin`` time units toward the attractor."""
    w0 = random_initial_state(solver.grid, seed, amplitude, kmax)
    return w0.replace(solver.advance(w0.coeffs, steps_for(t_spin, solver.params.dt)))


@dataclass(eq=False)
class Trajectory:
    """Vorticity states at ``times``; ``fields[j]`` is an ``n x n`` coefficient array."""

    grid: WavenumberGrid
    times: np.ndarray
    fields: np.ndarray

    def __len__(self):
        return len(self.times)

    def field(self, j: int) -> SpectralField:
        return SpectralField(self.grid, self.fields[j], "vorticity")


def generate_truth(solver: Solver, u0: SpectralField, h: float, steps: int) -> Trajectory:
    """``u_{j+1} = Psi(u_j, h)`` for ``j = 0 .. steps-1``."""
    k = steps_for(h, solver.params.dt)
    out = np.empty((steps + 1,) + u0.grid.shape, np.complex128)
    out[0] = u0.coeffs
    for j in range(steps):
        out[j + 1] = solver.advance(out[j], k)
    return Trajectory(u0.grid, h * np.arange(steps + 1), out)


def generate_observations(truth: Trajectory, model: NoiseModel) -> list[Observation]:
    """Observations for ``j = 1 .. J`` (none at the initial time)."""
    return [observe(truth.field(j), model, j) for j in range(1, len(truth))]


# persistence ---------------------------------------------------------------

def _write_meta(fh, grid, header_lines):
    for line in header_lines:
        fh.write(f"# {line}\n")
    fh.write(f"# n={grid.n}\n# L={grid.L!r}\n")


def write_trajectory(traj: Trajectory, fh: io.TextIOBase, header_lines=()) -> None:
    """One block of ``step,time,k1,k2,re,im`` rows per step over the independent half-lattice."""
    g = traj.grid
    _write_meta(fh, g, header_lines)
    fh.write("step,time,k1,k2,re,im\n")
    pos = [g.index(k1, k2) for k1, k2 in half_lattice(g)]
    modes = half_lattice(g)
    for j, t in enumerate(traj.times):
        c = traj.fields[j]
        for (k1, k2), p in zip(modes, pos):
            v = c[p]
            fh.write(f"{j},{float(t)!r},{k1},{k2},{float(v.real)!r},{float(v.imag)!r}\n")


def write_observations(obs: list[Observation], h: float, fh: io.TextIOBase, header_lines=()) -> None:
    if not obs:
        raise ValueError("no observations to write")
    g = obs[0].y.grid
    _write_meta(fh, g, header_lines)
    fh.write("step,time,k1,k2,y_re,y_im,xi_re,xi_im\n")
    modes = half_lattice(g)
    pos = [g.index(k1, k2) for k1, k2 in modes]
    for o in obs:
        t = o.step * h
        for (k1, k2), p in zip(modes, pos):
            y, x = o.y.coeffs[p], o.xi.coeffs[p]
            fh.write(
                f"{o.step},{float(t)!r},{k1},{k2},{float(y.real)!r},{float(y.imag)!r},"
                f"{float(x.real)!r},{float(x.imag)!r}\n"
            )


def _read_blocks(fh, expected_header):
    meta = {}
    blocks: dict[int, list] = {}
    times: dict[int, float] = {}
    header_seen = False
    for line in fh:
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].strip().partition("=")
            if sep:
                meta[key.strip()] = val.strip()
            continue
        if not header_seen:
            if line.split(",") != expected_header:
                raise SchemaError(f"expected columns {','.join(expected_header)}, found {line}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != len(expected_header):
            raise SchemaError(f"malformed row: {line}")
        j = int(parts[0])
        times[j] = float(parts[1])
        blocks.setdefault(j, []).append(parts[2:])
    if not header_seen or "n" not in meta or "L" not in meta:
        raise SchemaError("missing column header or grid metadata")
    return meta, make_grid(int(meta["n"]), float(meta["L"])), blocks, times


def read_trajectory(fh: io.TextIOBase) -> Trajectory:
    _, grid, blocks, times = _read_blocks(fh, ["step", "time", "k1", "k2", "re", "im"])
    steps = sorted(blocks)
    if steps != list(range(len(steps))):
        raise SchemaError("trajectory steps are not contiguous from 0")
    fields = np.stack([coeffs_from_rows(grid, blocks[j]) for j in steps])
    return Trajectory(grid, np.array([times[j] for j in steps]), fields)


def read_observations(fh: io.TextIOBase) -> list[Observation]:
    _, grid, blocks, _ = _read_blocks(fh, ["step", "time", "k1", "k2", "y_re", "y_im", "xi_re", "xi_im"])
    out = []
    for j in sorted(blocks):
        rows = blocks[j]
        y = coeffs_from_rows(grid, [r[:4] for r in rows])
        xi = coeffs_from_rows(grid, [r[:2] + r[4:6] for r in rows])
        out.append(Observation(j, SpectralField(grid, y), SpectralField(grid, xi)))
    return out
