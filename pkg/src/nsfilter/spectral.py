"""Wavenumber lattice, spectral fields and the diagonal operators on the torus.

Fields are stored as Fourier-series coefficients on an ``n x n`` array in the
standard FFT layout, so that a real field is ``f(x) = sum_k c_k exp(2 pi i k.x/L)``.
Row index maps to ``k1``, column index to ``k2``. The Nyquist row/column and the
zero mode are always zero.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

KINDS = ("vorticity", "stream", "velocity-component", "generic")
UNITS = ("velocity", "vorticity")


@dataclass(frozen=True, eq=False)
class WavenumberGrid:
    """Index lattice and per-mode eigenvalue tables for an ``n x n`` truncation."""

    n: int
    L: float
    k1: np.ndarray = field(repr=False)
    k2: np.ndarray = field(repr=False)
    ksq: np.ndarray = field(repr=False)
    stokes: np.ndarray = field(repr=False)
    active: np.ndarray = field(repr=False)

    @property
    def lambda1(self) -> float:
        """Smallest Stokes eigenvalue ``4 pi^2 / L^2``."""
        return 4.0 * math.pi**2 / self.L**2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def padded_size(self) -> int:
        return 2 * self.n

    @property
    def n_active(self) -> int:
        """Number of retained complex modes (= independent real degrees of freedom)."""
        return int(self.active.sum())

    def mu(self, ell: float | None = None) -> np.ndarray:
        """Eigenvalues of ``A0 = ell * A``; ``ell=None`` means ``1/lambda1``."""
        if ell is None:
            ell = 1.0 / self.lambda1
        return ell * self.stokes

    def index(self, k1: int, k2: int) -> tuple[int, int]:
        """Array position of wavevector ``(k1, k2)``."""
        h = self.n // 2
        if not (-h < k1 < h and -h < k2 < h):
            raise ValueError(f"mode ({k1}, {k2}) outside the retained band |k_i| < {h}")
        return (k1 % self.n, k2 % self.n)

    def observed_mask(self, lam: float) -> np.ndarray:
        """Modes with ``4 pi^2 |k|^2 < lam L^2``; ``lam`` in absolute units, ``inf`` allowed."""
        if math.isinf(lam):
            return self.active.copy()
        return self.active & (4.0 * math.pi**2 * self.ksq < lam * self.L**2)

    def unit_scale(self, units: str) -> np.ndarray:
        """Per-mode factor ``s_k`` with ``|vorticity coeff| = s_k |coeff in units|``.

        ``velocity`` refers to the amplitude in the divergence-free basis
        ``k_perp/|k| exp(2 pi i k.x/L)``; ``vorticity`` is the identity.
        """
        if units == "vorticity":
            return np.where(self.active, 1.0, 0.0)
        if units == "velocity":
            return np.where(self.active, np.sqrt(self.stokes), 0.0)
        raise ValueError(f"unknown units {units!r}; expected one of {UNITS}")


def make_grid(n: int, L: float) -> WavenumberGrid:
    """Build the lattice ``{-n/2, ..., n/2-1}^2`` on a torus of side ``L``."""
    if int(n) != n or n < 4 or n % 2:
        raise ValueError(f"n must be an even integer >= 4, got {n!r}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L!r}")
    n = int(n)
    k = np.fft.fftfreq(n, 1.0 / n).astype(np.int64)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    ksq = k1**2 + k2**2
    active = (k1 != -n // 2) & (k2 != -n // 2) & (ksq > 0)
    stokes = 4.0 * math.pi**2 * ksq / L**2
    for arr in (k1, k2, ksq, stokes, active):
        arr.setflags(write=False)
    return WavenumberGrid(n=n, L=float(L), k1=k1, k2=k2, ksq=ksq, stokes=stokes, active=active)


def flip(coeffs: np.ndarray) -> np.ndarray:
    """Return ``c[-k]`` for an array in FFT layout."""
    return np.roll(coeffs[::-1, ::-1], 1, axis=(0, 1))


def symmetrize(coeffs: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Project onto reality-symmetric, mean-zero, Nyquist-free coefficients."""
    out = 0.5 * (coeffs + np.conj(flip(coeffs)))
    out[~active] = 0.0
    return out


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable Fourier coefficients of a real scalar field."""

    grid: WavenumberGrid
    coeffs: np.ndarray
    kind: str = "vorticity"

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128, order="C")
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: WavenumberGrid, kind: str = "vorticity") -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, np.complex128), kind)

    @classmethod
    def from_modes(cls, grid, modes: dict, kind: str = "vorticity") -> "SpectralField":
        """Field with the given ``{(k1, k2): value}`` entries and their conjugate partners."""
        c = np.zeros(grid.shape, np.complex128)
        for (k1, k2), v in modes.items():
            if (k1, k2) == (0, 0):
                raise ValueError("the zero mode is excluded from the state")
            c[grid.index(k1, k2)] = v
            c[grid.index(-k1, -k2)] = np.conj(v)
        return cls(grid, c, kind)

    def replace(self, coeffs: np.ndarray, kind: str | None = None) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.kind if kind is None else kind)

    def mode(self, k1: int, k2: int) -> complex:
        return complex(self.coeffs[self.grid.index(k1, k2)])

    def is_valid(self, rtol: float = 1e-14) -> bool:
        """Reality, zero-mean and Nyquist invariants."""
        c = self.coeffs
        scale = max(float(np.abs(c).max()), 1e-300)
        if np.any(c[~self.grid.active] != 0):
            return False
        return bool(np.abs(c - np.conj(flip(c))).max() <= rtol * scale)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return self.replace(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self.replace(self.coeffs - other.coeffs)

    def __mul__(self, factor) -> "SpectralField":
        return self.replace(self.coeffs * factor)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self.replace(-self.coeffs)


@dataclass(frozen=True, eq=False)
class VelocityField:
    u1: SpectralField
    u2: SpectralField

    def divergence(self) -> np.ndarray:
        g = self.u1.grid
        return 2j * math.pi * (g.k1 * self.u1.coeffs + g.k2 * self.u2.coeffs) / g.L


def p_lambda(f: SpectralField, lam: float) -> SpectralField:
    """Keep modes with ``4 pi^2 |k|^2 < lam L^2`` (``lam`` absolute, ``inf`` = identity)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return f.replace(np.where(f.grid.observed_mask(lam), f.coeffs, 0.0))


def q_lambda(f: SpectralField, lam: float) -> SpectralField:
    return f.replace(f.coeffs - p_lambda(f, lam).coeffs)


def sobolev_norm(f: SpectralField, s: float) -> float:
    """``(sum_k (4 pi^2 |k|^2)^s |f_k|^2)^(1/2)`` with the weights exactly as written (no L)."""
    g = f.grid
    w = np.zeros(g.shape)
    w[g.active] = (4.0 * math.pi**2 * g.ksq[g.active]) ** s
    return float(math.sqrt(np.sum(w * (f.coeffs.real**2 + f.coeffs.imag**2))))


def _inverse_stokes(grid: WavenumberGrid) -> np.ndarray:
    inv = np.zeros(grid.shape)
    inv[grid.active] = 1.0 / grid.stokes[grid.active]
    return inv


def stream_from_vorticity(w: SpectralField) -> SpectralField:
    """``zeta_k = -w_k L^2 / (4 pi^2 |k|^2)``, i.e. ``w = Laplacian(zeta)``."""
    return w.replace(-w.coeffs * _inverse_stokes(w.grid), kind="stream")


def velocity_from_vorticity(w: SpectralField) -> VelocityField:
    """``u = grad_perp(zeta) = (d2 zeta, -d1 zeta)``."""
    g = w.grid
    zeta = stream_from_vorticity(w).coeffs
    c1 = 2j * math.pi * g.k1 / g.L
    c2 = 2j * math.pi * g.k2 / g.L
    u1 = SpectralField(g, c2 * zeta, "velocity-component")
    u2 = SpectralField(g, -c1 * zeta, "velocity-component")
    return VelocityField(u1, u2)


def vorticity_from_velocity(u: VelocityField) -> SpectralField:
    """``w = grad_perp . u = d2 u1 - d1 u2``."""
    g = u.u1.grid
    c1 = 2j * math.pi * g.k1 / g.L
    c2 = 2j * math.pi * g.k2 / g.L
    w = c2 * u.u1.coeffs - c1 * u.u2.coeffs
    w[~g.active] = 0.0
    return SpectralField(g, w, "vorticity")


def to_units(w: SpectralField, units: str) -> np.ndarray:
    """Coefficients of a vorticity field expressed in ``units``.

    For ``velocity`` this is the amplitude on the basis ``k_perp/|k| e_k``,
    ``-i w_k / sqrt(a_k)``, which obeys ``u_{-k} = -conj(u_k)``.
    """
    s = w.grid.unit_scale(units)
    out = np.zeros(w.grid.shape, np.complex128)
    a = w.grid.active
    out[a] = w.coeffs[a] / s[a]
    if units == "velocity":
        out *= -1j
    return out


def from_units(coeffs: np.ndarray, grid: WavenumberGrid, units: str) -> np.ndarray:
    """Inverse of :func:`to_units`; returns vorticity coefficients."""
    c = np.asarray(coeffs, dtype=np.complex128) * grid.unit_scale(units)
    if units == "velocity":
        c = c * 1j
    return c


def norm_sq(coeffs: np.ndarray, grid: WavenumberGrid, units: str) -> float:
    """Squared H^0 norm ``sum_k |c_k|^2`` of vorticity coefficients measured in ``units``."""
    s = grid.unit_scale(units)
    a = grid.active
    c = coeffs[a] / s[a]
    return float(np.sum(c.real**2 + c.imag**2))


def to_physical(f: SpectralField, padded: bool = False) -> np.ndarray:
    """Real samples on the ``n x n`` (or zero-padded ``2n x 2n``) uniform grid."""
    g = f.grid
    m = g.padded_size if padded else g.n
    buf = np.zeros((m, m), np.complex128)
    idx = _band_index(g.n, m)
    buf[np.ix_(idx, idx)] = f.coeffs
    return np.fft.ifft2(buf).real * (m * m)


def from_physical(samples: np.ndarray, grid: WavenumberGrid, kind: str = "generic") -> SpectralField:
    """Inverse of :func:`to_physical`; padded samples are truncated to the retained band."""
    samples = np.asarray(samples, dtype=np.float64)
    m = samples.shape[0]
    if samples.ndim != 2 or samples.shape[1] != m or m not in (grid.n, grid.padded_size):
        raise ValueError(
            f"samples of shape {samples.shape} match neither {grid.shape} nor the padded grid"
        )
    spec = np.fft.fft2(samples) / (m * m)
    idx = _band_index(grid.n, m)
    c = spec[np.ix_(idx, idx)]
    return SpectralField(grid, symmetrize(c, grid.active), kind)


def _band_index(n: int, m: int) -> np.ndarray:
    return np.r_[0 : n // 2, m - n // 2 : m]


# serialization ------------------------------------------------------------

def half_lattice(grid: WavenumberGrid) -> list[tuple[int, int]]:
    """Independent representatives: ``k1 > 0``, or ``k1 == 0`` and ``k2 > 0``."""
    h = grid.n // 2
    out = []
    for k1 in range(0, h):
        for k2 in range(-h + 1, h):
            if k1 > 0 or k2 > 0:
                out.append((k1, k2))
    return out


def field_rows(f: SpectralField) -> Iterable[tuple[int, int, float, float]]:
    g = f.grid
    for k1, k2 in half_lattice(g):
        v = f.coeffs[g.index(k1, k2)]
        yield k1, k2, float(v.real), float(v.imag)


def write_field(f: SpectralField, fh: io.TextIOBase) -> None:
    """Write ``# n``, ``# L``, ``# kind`` header lines then ``k1,k2,re,im`` rows."""
    fh.write(f"# n={f.grid.n}\n# L={f.grid.L!r}\n# kind={f.kind}\n")
    fh.write("k1,k2,re,im\n")
    for k1, k2, re, im in field_rows(f):
        fh.write(f"{k1},{k2},{re!r},{im!r}\n")


def read_field(fh: io.TextIOBase) -> SpectralField:
    meta = {}
    rows = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
            continue
        if line.startswith("k1"):
            continue
        rows.append(line.split(","))
    try:
        grid = make_grid(int(meta["n"]), float(meta["L"]))
    except KeyError as exc:
        raise ValueError(f"field header is missing {exc}") from None
    return SpectralField(grid, coeffs_from_rows(grid, rows), meta.get("kind", "generic"))


def coeffs_from_rows(grid: WavenumberGrid, rows) -> np.ndarray:
    c = np.zeros(grid.shape, np.complex128)
    for r in rows:
        k1, k2 = int(r[0]), int(r[1])
        v = complex(float(r[2]), float(r[3]))
        c[grid.index(k1, k2)] = v
        c[grid.index(-k1, -k2)] = v.conjugate()
    return c
