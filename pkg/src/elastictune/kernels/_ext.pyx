# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot inner loops.

Same surface as :mod:`elastictune.kernels.numpy_backend`; inputs are
C-contiguous float64 arrays in the canonical shapes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt, tanh

cnp.import_array()

NAME = "ext"

cdef double GELU_COEF = 0.044715
cdef double GELU_SCALE = sqrt(2.0 / 3.141592653589793)


def matmul2d(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j, p
    cdef double aip
    with nogil:
        for i in range(m):
            for p in range(k):
                aip = a[i, p]
                for j in range(n):
                    c[i, j] += aip * b[p, j]
    return out


def bmm3(double[:, :, ::1] a, double[:, :, ::1] b):
    cdef Py_ssize_t nb = a.shape[0], m = a.shape[1], k = a.shape[2], n = b.shape[2]
    out = np.zeros((nb, m, n), dtype=np.float64)
    cdef double[:, :, ::1] c = out
    cdef Py_ssize_t t, i, j, p
    cdef double aip
    with nogil:
        for t in range(nb):
            for i in range(m):
                for p in range(k):
                    aip = a[t, i, p]
                    for j in range(n):
                        c[t, i, j] += aip * b[t, p, j]
    return out


def softmax2d(double[:, ::1] x):
    cdef Py_ssize_t r = x.shape[0], d = x.shape[1]
    out = np.empty((r, d), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t i, j
    cdef double m, s
    with nogil:
        for i in range(r):
            m = x[i, 0]
            for j in range(1, d):
                if x[i, j] > m:
                    m = x[i, j]
            s = 0.0
            for j in range(d):
                y[i, j] = exp(x[i, j] - m)
                s += y[i, j]
            for j in range(d):
                y[i, j] /= s
    return out


def softmax2d_backward(double[:, ::1] y, double[:, ::1] g):
    cdef Py_ssize_t r = y.shape[0], d = y.shape[1]
    out = np.empty((r, d), dtype=np.float64)
    cdef double[:, ::1] dx = out
    cdef Py_ssize_t i, j
    cdef double dot
    with nogil:
        for i in range(r):
            dot = 0.0
            for j in range(d):
                dot += g[i, j] * y[i, j]
            for j in range(d):
                dx[i, j] = y[i, j] * (g[i, j] - dot)
    return out


def log_softmax2d(double[:, ::1] x):
    cdef Py_ssize_t r = x.shape[0], d = x.shape[1]
    out = np.empty((r, d), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t i, j
    cdef double m, s
    with nogil:
        for i in range(r):
            m = x[i, 0]
            for j in range(1, d):
                if x[i, j] > m:
                    m = x[i, j]
            s = 0.0
            for j in range(d):
                s += exp(x[i, j] - m)
            s = log(s)
            for j in range(d):
                y[i, j] = x[i, j] - m - s
    return out


def log_softmax2d_backward(double[:, ::1] y, double[:, ::1] g):
    cdef Py_ssize_t r = y.shape[0], d = y.shape[1]
    out = np.empty((r, d), dtype=np.float64)
    cdef double[:, ::1] dx = out
    cdef Py_ssize_t i, j
    cdef double s
    with nogil:
        for i in range(r):
            s = 0.0
            for j in range(d):
                s += g[i, j]
            for j in range(d):
                dx[i, j] = g[i, j] - exp(y[i, j]) * s
    return out


def gelu1d(double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef Py_ssize_t i
    cdef double u
    with nogil:
        for i in range(n):
            u = GELU_SCALE * (x[i] + GELU_COEF * x[i] * x[i] * x[i])
            y[i] = 0.5 * x[i] * (1.0 + tanh(u))
    return out


def gelu1d_backward(double[::1] x, double[::1] g):
    cdef Py_ssize_t n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] dx = out
    cdef Py_ssize_t i
    cdef double u, t, du
    with nogil:
        for i in range(n):
            u = GELU_SCALE * (x[i] + GELU_COEF * x[i] * x[i] * x[i])
            t = tanh(u)
            du = GELU_SCALE * (1.0 + 3.0 * GELU_COEF * x[i] * x[i])
            dx[i] = g[i] * (0.5 * (1.0 + t) + 0.5 * x[i] * (1.0 - t * t) * du)
    return out


def layernorm2d(double[:, ::1] x, double[::1] gain, double[::1] bias, double eps):
    cdef Py_ssize_t r = x.shape[0], d = x.shape[1]
    out = np.empty((r, d), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t i, j
    cdef double mu, var, rstd, diff
    with nogil:
        for i in range(r):
            mu = 0.0
            for j in range(d):
                mu += x[i, j]
            mu /= d
            var = 0.0
            for j in range(d):
                diff = x[i, j] - mu
                var += diff * diff
            var /= d
            rstd = 1.0 / sqrt(var + eps)
            for j in range(d):
                y[i, j] = (x[i, j] - mu) * rstd * gain[j] + bias[j]
    return out


def layernorm2d_backward(double[:, ::1] x, double[::1] gain, double eps,
                         double[:, ::1] g):
    cdef Py_ssize_t r = x.shape[0], d = x.shape[1]
    dx_arr = np.empty((r, d), dtype=np.float64)
    dgain_arr = np.zeros(d, dtype=np.float64)
    dbias_arr = np.zeros(d, dtype=np.float64)
    cdef double[:, ::1] dx = dx_arr
    cdef double[::1] dgain = dgain_arr
    cdef double[::1] dbias = dbias_arr
    cdef Py_ssize_t i, j
    cdef double mu, var, rstd, xhat, gg, mean_gg, mean_ggx
    with nogil:
        for i in range(r):
            mu = 0.0
            for j in range(d):
                mu += x[i, j]
            mu /= d
            var = 0.0
            for j in range(d):
                var += (x[i, j] - mu) * (x[i, j] - mu)
            var /= d
            rstd = 1.0 / sqrt(var + eps)
            mean_gg = 0.0
            mean_ggx = 0.0
            for j in range(d):
                xhat = (x[i, j] - mu) * rstd
                gg = g[i, j] * gain[j]
                mean_gg += gg
                mean_ggx += gg * xhat
                dgain[j] += g[i, j] * xhat
                dbias[j] += g[i, j]
            mean_gg /= d
            mean_ggx /= d
            for j in range(d):
                xhat = (x[i, j] - mu) * rstd
                dx[i, j] = rstd * (g[i, j] * gain[j] - mean_gg - xhat * mean_ggx)
    return dx_arr, dgain_arr, dbias_arr
