"""Pure numpy/scipy implementation of the hot kernels.

Same interface as the compiled ``_kernels`` extension: a ``NonlinearKernel``
evaluating the dealiased advection term and ``etd4rk_advance`` running many
exponential Runge-Kutta steps.
"""
import math

import numpy as np
from scipy import fft as sfft

NAME = "python"


class NonlinearKernel:
    """Evaluates ``-u . grad(w)`` with products on the ``2n x 2n`` zero-padded grid."""

    def __init__(self, n, L):
        self.n = n = int(n)
        self.L = float(L)
        self.m = m = 2 * n
        h = n // 2
        k = np.fft.fftfreq(n, 1.0 / n)
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        ksq = k1**2 + k2**2
        self.active = (k1 != -h) & (k2 != -h) & (ksq > 0)
        stokes = 4.0 * math.pi**2 * ksq / L**2
        inva = np.zeros((n, n))
        inva[self.active] = 1.0 / stokes[self.active]
        c1 = 2.0 * math.pi * k1 / L
        c2 = 2.0 * math.pi * k2 / L
        # retained rows (Nyquist row dropped) and the k2 >= 0 half
        self._rows = np.r_[0:h, h + 1 : n]
        self._prow = np.r_[0:h, m - h + 1 : m]
        self._half = slice(0, h)
        self._c1 = c1[self._rows][:, self._half]
        self._c2 = c2[self._rows][:, self._half]
        self._inva = inva[self._rows][:, self._half]
        self._scale = 1.0 / (m * m)

    def evaluate(self, w):
        n, m, h = self.n, self.m, self.n // 2
        wh = w[self._rows][:, self._half]
        zeta = -wh * self._inva
        spec = np.zeros((4, m, m // 2 + 1), np.complex128)
        rows = self._prow
        spec[0, rows, :h] = 1j * self._c2 * zeta
        spec[1, rows, :h] = -1j * self._c1 * zeta
        spec[2, rows, :h] = 1j * self._c1 * wh
        spec[3, rows, :h] = 1j * self._c2 * wh
        phys = sfft.irfft2(spec, s=(m, m), norm="forward")
        prod = -(phys[0] * phys[2] + phys[1] * phys[3])
        ps = sfft.rfft2(prod) * self._scale
        out = np.zeros((n, n), np.complex128)
        out[self._rows, :h] = ps[rows, :h]
        # conjugate fill of k2 < 0 and of k1 < 0 on the k2 = 0 column
        neg = np.conj(np.roll(out[::-1, ::-1], 1, axis=(0, 1)))
        out[:, h + 1 :] = neg[:, h + 1 :]
        out[h + 1 :, 0] = neg[h + 1 :, 0]
        out[0, 0] = 0.0
        return out


def etd4rk_advance(kernel, w, nsteps, E, E2, Q, f1, f2, f3, g):
    """Advance ``nsteps`` ETD4RK steps; returns ``(w, bad_step)`` with ``bad_step=-1`` if finite."""
    v = np.array(w, dtype=np.complex128, copy=True)
    active = kernel.active
    ev = kernel.evaluate
    for s in range(int(nsteps)):
        nv = ev(v) + g
        a = E2 * v + Q * nv
        na = ev(a) + g
        b = E2 * v + Q * na
        nb = ev(b) + g
        c = E2 * a + Q * (2.0 * nb - nv)
        nc = ev(c) + g
        v = E * v + f1 * nv + 2.0 * f2 * (na + nb) + f3 * nc
        v[~active] = 0.0
        if not np.isfinite(v).all():
            return v, s + 1
    return v, -1
