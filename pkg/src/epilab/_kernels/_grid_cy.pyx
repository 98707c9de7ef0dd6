# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid energy kernels; see numpy_impl.py for the semantics."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def energy(cnp.ndarray[double, ndim=3] values,
           cnp.ndarray[cnp.uint8_t, ndim=2] active,
           cnp.ndarray[cnp.uint8_t, ndim=2] free,
           cnp.ndarray[double, ndim=2] q,
           double kappa, double h):
    cdef Py_ssize_t ny = values.shape[0]
    cdef Py_ssize_t nx = values.shape[1]
    cdef Py_ssize_t nc = values.shape[2]
    cdef Py_ssize_t i, j, c
    cdef double e = 0.0, d, t2
    cdef double k2 = kappa * kappa
    cdef double h2 = h * h
    for i in range(ny):
        for j in range(nx):
            if not active[i, j]:
                continue
            if j + 1 < nx and active[i, j + 1]:
                for c in range(nc):
                    d = values[i, j + 1, c] - values[i, j, c]
                    e += d * d
            if i + 1 < ny and active[i + 1, j]:
                for c in range(nc):
                    d = values[i + 1, j, c] - values[i, j, c]
                    e += d * d
            t2 = 0.0
            for c in range(nc):
                t2 += values[i, j, c] * values[i, j, c]
            if t2 < k2:
                e += h2 * q[i, j] * (t2 / k2)
            else:
                e += h2 * q[i, j]
    return e


def energy_and_grad(cnp.ndarray[double, ndim=3] values,
                    cnp.ndarray[cnp.uint8_t, ndim=2] active,
                    cnp.ndarray[cnp.uint8_t, ndim=2] free,
                    cnp.ndarray[double, ndim=2] q,
                    double kappa, double h):
    cdef Py_ssize_t ny = values.shape[0]
    cdef Py_ssize_t nx = values.shape[1]
    cdef Py_ssize_t nc = values.shape[2]
    cdef Py_ssize_t i, j, c
    cdef double e = 0.0, d, t2
    cdef double k2 = kappa * kappa
    cdef double h2 = h * h
    cdef cnp.ndarray[double, ndim=3] grad = np.zeros_like(values)
    for i in range(ny):
        for j in range(nx):
            if not active[i, j]:
                continue
            if j + 1 < nx and active[i, j + 1]:
                for c in range(nc):
                    d = values[i, j + 1, c] - values[i, j, c]
                    e += d * d
                    grad[i, j + 1, c] += 2.0 * d
                    grad[i, j, c] -= 2.0 * d
            if i + 1 < ny and active[i + 1, j]:
                for c in range(nc):
                    d = values[i + 1, j, c] - values[i, j, c]
                    e += d * d
                    grad[i + 1, j, c] += 2.0 * d
                    grad[i, j, c] -= 2.0 * d
            t2 = 0.0
            for c in range(nc):
                t2 += values[i, j, c] * values[i, j, c]
            if t2 < k2:
                e += h2 * q[i, j] * (t2 / k2)
                for c in range(nc):
                    grad[i, j, c] += 2.0 * h2 * q[i, j] * values[i, j, c] / k2
            else:
                e += h2 * q[i, j]
    for i in range(ny):
        for j in range(nx):
            if not free[i, j]:
                for c in range(nc):
                    grad[i, j, c] = 0.0
    return e, grad
