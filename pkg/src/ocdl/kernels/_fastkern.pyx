# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-frequency kernels.

Frequencies are independent, so the outer loops parallelize with OpenMP.
Every output element is produced by exactly one thread with a fixed inner
summation order, which keeps results identical for any thread count.

Unlike :mod:`ocdl.kernels.reference`, arrays here are frequency-major
(``(F, M)`` rather than ``(M, F)``) so each frequency's workload is
contiguous; the dispatch layer handles the transposition.
"""

from cython.parallel cimport prange

cdef extern from "complex.h" nogil:
    double complex conj(double complex x)
    double creal(double complex x)
    double cimag(double complex x)


def rank1_solve(const double complex[:, ::1] d_hat,
                const double complex[:, ::1] rhs,
                double rho,
                double complex[:, ::1] out,
                int threads):
    cdef Py_ssize_t nf = d_hat.shape[0], m = d_hat.shape[1]
    cdef Py_ssize_t f, i
    cdef double complex cross, scale
    cdef double gram
    for f in prange(nf, nogil=True, num_threads=threads, schedule="static"):
        cross = 0
        gram = 0
        for i in range(m):
            cross = cross + d_hat[f, i] * rhs[f, i]
            gram = gram + creal(d_hat[f, i]) * creal(d_hat[f, i]) \
                + cimag(d_hat[f, i]) * cimag(d_hat[f, i])
        scale = cross / (rho + gram)
        for i in range(m):
            out[f, i] = (rhs[f, i] - conj(d_hat[f, i]) * scale) / rho


def accumulate(double complex[:, :, ::1] a_blocks,
               double complex[:, ::1] b_vecs,
               const double complex[:, ::1] x_hat,
               const double complex[::1] s_hat,
               double alpha,
               int threads):
    cdef Py_ssize_t nf = a_blocks.shape[0], m = a_blocks.shape[1]
    cdef Py_ssize_t f, i, j
    cdef double complex xc
    for f in prange(nf, nogil=True, num_threads=threads, schedule="static"):
        for i in range(m):
            xc = conj(x_hat[f, i])
            for j in range(m):
                a_blocks[f, i, j] = alpha * a_blocks[f, i, j] + xc * x_hat[f, j]
            b_vecs[f, i] = alpha * b_vecs[f, i] + xc * s_hat[f]


def block_matvec(const double complex[:, :, ::1] a_blocks,
                 const double complex[:, ::1] v,
                 double complex[:, ::1] out,
                 int threads):
    cdef Py_ssize_t nf = a_blocks.shape[0], m = a_blocks.shape[1]
    cdef Py_ssize_t f, i, j
    cdef double complex acc
    for f in prange(nf, nogil=True, num_threads=threads, schedule="static"):
        for i in range(m):
            acc = 0
            for j in range(m):
                acc = acc + a_blocks[f, i, j] * v[f, j]
            out[f, i] = acc


def quad_terms(const double complex[:, :, ::1] a_blocks,
               const double complex[:, ::1] b_vecs,
               const double complex[:, ::1] g_hat,
               double[::1] out,
               int threads):
    cdef Py_ssize_t nf = a_blocks.shape[0], m = a_blocks.shape[1]
    cdef Py_ssize_t f, i, j
    cdef double complex row, gc
    cdef double total
    for f in prange(nf, nogil=True, num_threads=threads, schedule="static"):
        total = 0
        for i in range(m):
            gc = conj(g_hat[f, i])
            row = 0
            for j in range(m):
                row = row + a_blocks[f, i, j] * g_hat[f, j]
            total = total + creal(gc * row) - 2.0 * creal(gc * b_vecs[f, i])
        out[f] = total
