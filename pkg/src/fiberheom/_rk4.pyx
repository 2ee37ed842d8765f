# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 propagation of ``x' = L x`` for a CSR matrix ``L``.

Complex vectors are handled as interleaved (re, im) doubles.
"""
import numpy as np

from libc.math cimport isfinite


cdef inline void _matvec(const int* indptr, const int* indices, const double* data,
                         const double* x, double* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, p, j
    cdef double re, im, dr, di, xr, xi
    for i in range(n):
        re = 0.0
        im = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = 2 * indices[p]
            dr = data[2 * p]
            di = data[2 * p + 1]
            xr = x[j]
            xi = x[j + 1]
            re += dr * xr - di * xi
            im += dr * xi + di * xr
        out[2 * i] = re
        out[2 * i + 1] = im


def rk4_csr(const int[::1] indptr, const int[::1] indices,
            const double complex[::1] data, double complex[::1] x,
            double h, Py_ssize_t nsteps, const double complex[::1] phase=None):
    """Advance ``x`` in place by ``nsteps`` classical RK4 steps of size ``h``.

    If ``phase`` is given, every step ends with ``x *= phase`` (the exact
    propagator of a commuting diagonal part split off ``L``).

    Returns -1 on success, else the number of completed steps before a
    non-finite entry appeared.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = 2 * n
    cdef double[::1] work = np.empty(3 * m, dtype=np.float64)
    cdef double* k = &work[0]
    cdef double* acc = &work[m]
    cdef double* tmp = &work[2 * m]
    cdef double* y = <double*> &x[0]
    cdef const double* d = <const double*> &data[0]
    cdef const int* ip = &indptr[0]
    cdef const int* ix = &indices[0]
    cdef Py_ssize_t step = 0, i
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0
    cdef bint bad = 0
    cdef bint rotate = phase is not None and phase.shape[0] == n
    cdef const double* ph = NULL
    cdef double pr, pi, yr
    if rotate:
        ph = <const double*> &phase[0]
    with nogil:
        for step in range(nsteps):
            _matvec(ip, ix, d, y, k, n)
            for i in range(m):
                acc[i] = k[i]
                tmp[i] = y[i] + half * k[i]
            _matvec(ip, ix, d, tmp, k, n)
            for i in range(m):
                acc[i] += 2.0 * k[i]
                tmp[i] = y[i] + half * k[i]
            _matvec(ip, ix, d, tmp, k, n)
            for i in range(m):
                acc[i] += 2.0 * k[i]
                tmp[i] = y[i] + h * k[i]
            _matvec(ip, ix, d, tmp, k, n)
            for i in range(m):
                y[i] += sixth * (acc[i] + k[i])
                if not isfinite(y[i]):
                    bad = 1
            if rotate:
                for i in range(n):
                    pr = ph[2 * i]
                    pi = ph[2 * i + 1]
                    yr = y[2 * i]
                    y[2 * i] = pr * yr - pi * y[2 * i + 1]
                    y[2 * i + 1] = pr * y[2 * i + 1] + pi * yr
            if bad:
                break
    if bad:
        return step
    return -1
