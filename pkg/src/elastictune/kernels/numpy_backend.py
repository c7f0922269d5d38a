"""Pure-Python (numpy) kernel implementations.

This is the fallback backend used when the compiled extension is not
available.  All functions receive C-contiguous float64 arrays in the
canonical shapes documented in :mod:`elastictune.kernels`.
"""

import numpy as np

NAME = "numpy"

GELU_COEF = 0.044715
GELU_SCALE = float(np.sqrt(2.0 / np.pi))


def matmul2d(a, b):
    return a @ b


def bmm3(a, b):
    return np.matmul(a, b)


def softmax2d(x):
    m = x.max(axis=1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=1, keepdims=True)


def softmax2d_backward(y, g):
    return y * (g - (g * y).sum(axis=1, keepdims=True))


def log_softmax2d(x):
    m = x.max(axis=1, keepdims=True)
    z = x - m
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def log_softmax2d_backward(y, g):
    return g - np.exp(y) * g.sum(axis=1, keepdims=True)


def gelu1d(x):
    # tanh approximation: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3)))
    u = GELU_SCALE * (x + GELU_COEF * x * x * x)
    return 0.5 * x * (1.0 + np.tanh(u))


def gelu1d_backward(x, g):
    u = GELU_SCALE * (x + GELU_COEF * x * x * x)
    t = np.tanh(u)
    du = GELU_SCALE * (1.0 + 3.0 * GELU_COEF * x * x)
    return g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def layernorm2d(x, gain, bias, eps):
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    xhat = (x - mu) / np.sqrt(var + eps)
    return xhat * gain + bias


def layernorm2d_backward(x, gain, eps, g):
    d = x.shape[1]
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * rstd
    gg = g * gain
    dgain = (g * xhat).sum(axis=0)
    dbias = g.sum(axis=0)
    dx = rstd * (gg - gg.mean(axis=1, keepdims=True)
                 - xhat * (gg * xhat).sum(axis=1, keepdims=True) / d)
    return dx, dgain, dbias
