# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled MMD^2 pair-sum kernels.

Fused single-pass versions of the functions in ``kernels_py``; no [B, n, m]
temporaries are allocated.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()


cdef inline double _sign(double v) noexcept nogil:
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


def mmd2_energy(double[:, ::1] x, double[::1] y):
    cdef Py_ssize_t B = x.shape[0], n = x.shape[1], m = y.shape[0]
    cdef Py_ssize_t b, i, j
    cdef double sxx, sxy, syy = 0.0
    out = np.empty(B, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(m):
        for j in range(m):
            syy += fabs(y[i] - y[j])
    syy /= m * m
    with nogil:
        for b in range(B):
            sxx = 0.0
            sxy = 0.0
            for i in range(n):
                for j in range(n):
                    sxx += fabs(x[b, i] - x[b, j])
                for j in range(m):
                    sxy += fabs(x[b, i] - y[j])
            o[b] = -sxx / (n * n) - syy + 2.0 * sxy / (n * m)
    return out


def mmd2_energy_grad(double[:, ::1] x, double[::1] y, double[::1] upstream):
    cdef Py_ssize_t B = x.shape[0], n = x.shape[1], m = y.shape[0]
    cdef Py_ssize_t b, i, j
    cdef double sxx, sxy
    grad = np.empty((B, n), dtype=np.float64)
    cdef double[:, ::1] g = grad
    with nogil:
        for b in range(B):
            for i in range(n):
                sxx = 0.0
                sxy = 0.0
                for j in range(n):
                    sxx += _sign(x[b, i] - x[b, j])
                for j in range(m):
                    sxy += _sign(x[b, i] - y[j])
                g[b, i] = upstream[b] * (-2.0 * sxx / (n * n) + 2.0 * sxy / (n * m))
    return grad


def mmd2_gaussian(double[:, ::1] x, double[::1] y, double sigma):
    cdef Py_ssize_t B = x.shape[0], n = x.shape[1], m = y.shape[0]
    cdef Py_ssize_t b, i, j
    cdef double c = 1.0 / (2.0 * sigma * sigma)
    cdef double kxx, kxy, kyy = 0.0, d
    out = np.empty(B, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(m):
        for j in range(m):
            d = y[i] - y[j]
            kyy += exp(-c * d * d)
    kyy /= m * m
    with nogil:
        for b in range(B):
            kxx = 0.0
            kxy = 0.0
            for i in range(n):
                for j in range(n):
                    d = x[b, i] - x[b, j]
                    kxx += exp(-c * d * d)
                for j in range(m):
                    d = x[b, i] - y[j]
                    kxy += exp(-c * d * d)
            o[b] = kxx / (n * n) + kyy - 2.0 * kxy / (n * m)
    return out


def mmd2_gaussian_grad(double[:, ::1] x, double[::1] y, double sigma,
                       double[::1] upstream):
    cdef Py_ssize_t B = x.shape[0], n = x.shape[1], m = y.shape[0]
    cdef Py_ssize_t b, i, j
    cdef double s2 = sigma * sigma
    cdef double c = 1.0 / (2.0 * s2)
    cdef double gxx, gxy, d
    grad = np.empty((B, n), dtype=np.float64)
    cdef double[:, ::1] g = grad
    with nogil:
        for b in range(B):
            for i in range(n):
                gxx = 0.0
                gxy = 0.0
                for j in range(n):
                    d = x[b, i] - x[b, j]
                    gxx += exp(-c * d * d) * d
                for j in range(m):
                    d = x[b, i] - y[j]
                    gxy += exp(-c * d * d) * d
                g[b, i] = upstream[b] * (-2.0 * gxx / (n * n * s2) + 2.0 * gxy / (n * m * s2))
    return grad
