"""Kernel dispatch for the numeric hot loops.

Two interchangeable backends implement the same low-level surface: a
compiled Cython extension (``ext``) and a numpy fallback (``numpy``).
The extension is selected at import time when it built successfully;
``ELASTICTUNE_KERNELS=ext|numpy`` forces a choice, and tests or
benchmarks may switch at runtime with :func:`set_backend`.

The dispatch layer normalizes shapes so backends only ever see
C-contiguous float64 arrays:

* ``matmul(a, b)``        -- 2-D x 2-D
* ``bmm(a, b)``           -- batched 3-D x 3-D
* ``softmax(x)``          -- over the last axis, any rank
* ``log_softmax(x)``      -- over the last axis, any rank
* ``gelu(x)``             -- elementwise, any rank
* ``layernorm(x, g, b)``  -- over the last axis, any rank

plus the matching ``*_backward`` routines.
"""

import os

import numpy as np

from . import numpy_backend

_BACKENDS = {"numpy": numpy_backend}

try:
    from . import _ext

    _BACKENDS["ext"] = _ext
except ImportError:  # extension not built; numpy fallback only
    pass


def available_backends():
    return sorted(_BACKENDS)


def _default_backend():
    forced = os.environ.get("ELASTICTUNE_KERNELS")
    if forced:
        if forced not in _BACKENDS:
            raise RuntimeError(
                f"ELASTICTUNE_KERNELS={forced!r} but available backends are "
                f"{available_backends()}"
            )
        return _BACKENDS[forced]
    return _BACKENDS.get("ext", numpy_backend)


_active = _default_backend()


def set_backend(name):
    """Select the active kernel backend ('ext' or 'numpy')."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _active = _BACKENDS[name]


def backend_name():
    return _active.NAME


def _c64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def matmul(a, b):
    return _active.matmul2d(_c64(a), _c64(b))


def bmm(a, b):
    return _active.bmm3(_c64(a), _c64(b))


def softmax(x):
    x = _c64(x)
    y = _active.softmax2d(x.reshape(-1, x.shape[-1]))
    return y.reshape(x.shape)


def softmax_backward(y, g):
    y = _c64(y)
    g = _c64(g)
    d = y.shape[-1]
    out = _active.softmax2d_backward(y.reshape(-1, d), g.reshape(-1, d))
    return out.reshape(y.shape)


def log_softmax(x):
    x = _c64(x)
    y = _active.log_softmax2d(x.reshape(-1, x.shape[-1]))
    return y.reshape(x.shape)


def log_softmax_backward(y, g):
    y = _c64(y)
    g = _c64(g)
    d = y.shape[-1]
    out = _active.log_softmax2d_backward(y.reshape(-1, d), g.reshape(-1, d))
    return out.reshape(y.shape)


def gelu(x):
    x = _c64(x)
    return _active.gelu1d(x.reshape(-1)).reshape(x.shape)


def gelu_backward(x, g):
    x = _c64(x)
    g = _c64(g)
    return _active.gelu1d_backward(x.reshape(-1), g.reshape(-1)).reshape(x.shape)


def layernorm(x, gain, bias, eps):
    x = _c64(x)
    d = x.shape[-1]
    y = _active.layernorm2d(x.reshape(-1, d), _c64(gain), _c64(bias), float(eps))
    return y.reshape(x.shape)


def layernorm_backward(x, gain, eps, g):
    x = _c64(x)
    g = _c64(g)
    d = x.shape[-1]
    dx, dgain, dbias = _active.layernorm2d_backward(
        x.reshape(-1, d), _c64(gain), float(eps), g.reshape(-1, d)
    )
    return dx.reshape(x.shape), dgain, dbias
