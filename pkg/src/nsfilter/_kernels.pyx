# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels backed by FFTW.

Mirrors ``_pykernels``. Plans are built with FFTW_ESTIMATE so the transform
algorithm, and therefore every output bit, does not depend on run-time timing.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport M_PI, isfinite
from libc.string cimport memset

cnp.import_array()

cdef extern from "fftw3.h" nogil:
    ctypedef double fftw_complex[2]
    ctypedef struct fftw_plan_s:
        pass
    ctypedef fftw_plan_s* fftw_plan
    void* fftw_malloc(size_t n)
    void fftw_free(void* p)
    fftw_plan fftw_plan_many_dft_c2r(int rank, const int* n, int howmany,
                                     fftw_complex* inp, const int* inembed,
                                     int istride, int idist,
                                     double* out, const int* onembed,
                                     int ostride, int odist, unsigned flags)
    fftw_plan fftw_plan_dft_r2c_2d(int n0, int n1, double* inp, fftw_complex* out,
                                   unsigned flags)
    void fftw_execute(const fftw_plan p)
    void fftw_destroy_plan(fftw_plan p)
    unsigned FFTW_ESTIMATE
    unsigned FFTW_DESTROY_INPUT

NAME = "compiled"


cdef class NonlinearKernel:
    """Evaluates ``-u . grad(w)`` with products on the ``2n x 2n`` zero-padded grid."""

    cdef readonly int n, m
    cdef readonly double L
    cdef int mh
    cdef double complex* spec_in
    cdef double* phys
    cdef double complex* spec_out
    cdef fftw_plan inv_plan
    cdef fftw_plan fwd_plan
    cdef double[:, ::1] c1
    cdef double[:, ::1] c2
    cdef double[:, ::1] inva
    cdef readonly object active

    def __cinit__(self, int n, double L):
        cdef int dims[2]
        self.spec_in = NULL
        self.phys = NULL
        self.spec_out = NULL
        self.inv_plan = NULL
        self.fwd_plan = NULL
        if n < 4 or n % 2:
            raise ValueError("n must be an even integer >= 4")
        self.n = n
        self.m = 2 * n
        self.mh = self.m // 2 + 1
        self.L = L
        self.spec_in = <double complex*> fftw_malloc(4 * self.m * self.mh * sizeof(double complex))
        self.phys = <double*> fftw_malloc(4 * self.m * self.m * sizeof(double))
        self.spec_out = <double complex*> fftw_malloc(self.m * self.mh * sizeof(double complex))
        if self.spec_in == NULL or self.phys == NULL or self.spec_out == NULL:
            raise MemoryError()
        dims[0] = self.m
        dims[1] = self.m
        self.inv_plan = fftw_plan_many_dft_c2r(
            2, dims, 4, <fftw_complex*> self.spec_in, NULL, 1, self.m * self.mh,
            self.phys, NULL, 1, self.m * self.m, FFTW_ESTIMATE | FFTW_DESTROY_INPUT)
        self.fwd_plan = fftw_plan_dft_r2c_2d(
            self.m, self.m, self.phys, <fftw_complex*> self.spec_out,
            FFTW_ESTIMATE | FFTW_DESTROY_INPUT)
        if self.inv_plan == NULL or self.fwd_plan == NULL:
            raise RuntimeError("FFTW plan creation failed")

    def __init__(self, int n, double L):
        h = n // 2
        k = np.fft.fftfreq(n, 1.0 / n)
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        ksq = k1 ** 2 + k2 ** 2
        self.active = (k1 != -h) & (k2 != -h) & (ksq > 0)
        stokes = 4.0 * np.pi ** 2 * ksq / L ** 2
        inva = np.zeros((n, n))
        inva[self.active] = 1.0 / stokes[self.active]
        self.c1 = np.ascontiguousarray(2.0 * np.pi * k1 / L)
        self.c2 = np.ascontiguousarray(2.0 * np.pi * k2 / L)
        self.inva = inva

    def __dealloc__(self):
        if self.inv_plan != NULL:
            fftw_destroy_plan(self.inv_plan)
        if self.fwd_plan != NULL:
            fftw_destroy_plan(self.fwd_plan)
        if self.spec_in != NULL:
            fftw_free(self.spec_in)
        if self.phys != NULL:
            fftw_free(self.phys)
        if self.spec_out != NULL:
            fftw_free(self.spec_out)

    cdef void _eval(self, const double complex[:, ::1] w, double complex[:, ::1] out) noexcept nogil:
        cdef int n = self.n, m = self.m, mh = self.mh, h = self.n // 2
        cdef int i, j, r, p, mm = m * m, blk = m * mh
        cdef double complex val, zeta
        cdef double complex I = 1j
        cdef double* ph = self.phys
        cdef double scale = 1.0 / (<double> m * m)
        memset(self.spec_in, 0, 4 * blk * sizeof(double complex))
        for i in range(n):
            if i == h:
                continue
            r = i if i < h else i - n + m
            for j in range(h):
                val = w[i, j]
                zeta = -val * self.inva[i, j]
                self.spec_in[r * mh + j] = I * self.c2[i, j] * zeta
                self.spec_in[blk + r * mh + j] = -I * self.c1[i, j] * zeta
                self.spec_in[2 * blk + r * mh + j] = I * self.c1[i, j] * val
                self.spec_in[3 * blk + r * mh + j] = I * self.c2[i, j] * val
        fftw_execute(self.inv_plan)
        # product overwrites the first physical block, which is the r2c input
        for p in range(mm):
            ph[p] = -(ph[p] * ph[2 * mm + p] + ph[mm + p] * ph[3 * mm + p])
        fftw_execute(self.fwd_plan)
        for i in range(n):
            for j in range(n):
                out[i, j] = 0.0
        for i in range(n):
            if i == h:
                continue
            r = i if i < h else i - n + m
            for j in range(h):
                out[i, j] = self.spec_out[r * mh + j] * scale
        for i in range(n):
            if i == h:
                continue
            for j in range(1, h):
                val = out[i, j]
                out[(n - i) % n, n - j] = val.real - I * val.imag
        for i in range(1, h):
            val = out[i, 0]
            out[n - i, 0] = val.real - I * val.imag
        out[0, 0] = 0.0

    def evaluate(self, w):
        cdef const double complex[:, ::1] wv = np.ascontiguousarray(w, dtype=np.complex128)
        if wv.shape[0] != self.n or wv.shape[1] != self.n:
            raise ValueError("field shape does not match the kernel grid")
        out = np.zeros((self.n, self.n), np.complex128)
        cdef double complex[:, ::1] ov = out
        with nogil:
            self._eval(wv, ov)
        return out


def etd4rk_advance(NonlinearKernel kernel, w, long nsteps, E, E2, Q, f1, f2, f3, g):
    """Advance ``nsteps`` ETD4RK steps; returns ``(w, bad_step)`` with ``bad_step=-1`` if finite."""
    cdef int n = kernel.n
    v_arr = np.array(w, dtype=np.complex128, order="C", copy=True)
    cdef double complex[:, ::1] v = v_arr
    cdef double complex[:, ::1] nv = np.zeros((n, n), np.complex128)
    cdef double complex[:, ::1] na = np.zeros((n, n), np.complex128)
    cdef double complex[:, ::1] nb = np.zeros((n, n), np.complex128)
    cdef double complex[:, ::1] nc = np.zeros((n, n), np.complex128)
    cdef double complex[:, ::1] a = np.zeros((n, n), np.complex128)
    cdef double complex[:, ::1] b = np.zeros((n, n), np.complex128)
    cdef double complex[:, ::1] c = np.zeros((n, n), np.complex128)
    cdef const double[:, ::1] e = np.ascontiguousarray(E, dtype=np.float64)
    cdef const double[:, ::1] e2 = np.ascontiguousarray(E2, dtype=np.float64)
    cdef const double[:, ::1] q = np.ascontiguousarray(Q, dtype=np.float64)
    cdef const double[:, ::1] a1 = np.ascontiguousarray(f1, dtype=np.float64)
    cdef const double[:, ::1] a2 = np.ascontiguousarray(f2, dtype=np.float64)
    cdef const double[:, ::1] a3 = np.ascontiguousarray(f3, dtype=np.float64)
    cdef const double complex[:, ::1] gg = np.ascontiguousarray(g, dtype=np.complex128)
    cdef const cnp.uint8_t[:, ::1] act = np.ascontiguousarray(kernel.active, dtype=np.uint8)
    cdef long s
    cdef int i, j
    cdef bint finite
    cdef long bad = -1
    with nogil:
        for s in range(nsteps):
            kernel._eval(v, nv)
            for i in range(n):
                for j in range(n):
                    nv[i, j] = nv[i, j] + gg[i, j]
                    a[i, j] = e2[i, j] * v[i, j] + q[i, j] * nv[i, j]
            kernel._eval(a, na)
            for i in range(n):
                for j in range(n):
                    na[i, j] = na[i, j] + gg[i, j]
                    b[i, j] = e2[i, j] * v[i, j] + q[i, j] * na[i, j]
            kernel._eval(b, nb)
            for i in range(n):
                for j in range(n):
                    nb[i, j] = nb[i, j] + gg[i, j]
                    c[i, j] = e2[i, j] * a[i, j] + q[i, j] * (2.0 * nb[i, j] - nv[i, j])
            kernel._eval(c, nc)
            finite = True
            for i in range(n):
                for j in range(n):
                    nc[i, j] = nc[i, j] + gg[i, j]
                    if act[i, j]:
                        v[i, j] = (e[i, j] * v[i, j] + a1[i, j] * nv[i, j]
                                   + 2.0 * a2[i, j] * (na[i, j] + nb[i, j]) + a3[i, j] * nc[i, j])
                        if not (isfinite(v[i, j].real) and isfinite(v[i, j].imag)):
                            finite = False
                    else:
                        v[i, j] = 0.0
            if not finite:
                bad = s + 1
                break
    return v_arr, bad
