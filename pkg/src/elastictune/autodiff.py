"""Reverse-mode automatic differentiation over dense float64 tensors.

A :class:`Graph` is an append-only tape of primitive ops.  Nodes are
created through the op methods, which validate shapes up front and
compute values eagerly whenever all parent values are bound.  Leaves
come in three kinds: trainable parameters (``param``), named inputs
that may be re-fed through :meth:`Graph.evaluate`, and constants.
``backward`` walks the tape once in reverse creation order (creation
order is a topological order by construction) and returns one gradient
per trainable leaf.

Design constraints baked in here:

* everything is float64;
* ``slice_prefix`` values are numpy views into the parent value, never
  copies, so sliced sub-network execution shares parameter storage;
* GELU uses the tanh approximation
  ``0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x**3)))``;
* LayerNorm epsilon is fixed at 1e-5;
* any non-finite op output raises :class:`NumericError`.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels

LAYERNORM_EPS = 1e-5

_LEAF_OPS = ("param", "input", "constant")


class GraphError(ValueError):
    """Structural problem: bad shapes, bad op usage, missing inputs."""


class NumericError(ArithmeticError):
    """A forward pass produced NaN or Inf."""


class Node:
    __slots__ = ("graph", "idx", "op", "parents", "attrs", "shape", "value", "name")

    def __init__(self, graph, idx, op, parents, attrs, shape, value=None, name=None):
        self.graph = graph
        self.idx = idx
        self.op = op
        self.parents = parents
        self.attrs = attrs
        self.shape = shape
        self.value = value
        self.name = name

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<Node #{self.idx} {self.op}{tag} shape={self.shape}>"


def _as_f64(value):
    return np.asarray(value, dtype=np.float64)


class Graph:
    """Append-only op tape with eager evaluation and a single backward."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._params: dict[str, Node] = {}
        self._inputs: dict[str, Node] = {}

    # ------------------------------------------------------------------
    # leaves

    def param(self, name, value):
        """Trainable leaf. The array is referenced, not copied."""
        if name in self._params:
            raise GraphError(f"duplicate parameter name {name!r}")
        value = _as_f64(value)
        node = self._new("param", (), {}, value.shape, value, name=name)
        self._params[name] = node
        return node

    def input(self, name, shape, value=None):
        """Named input; bind now or later via evaluate(feeds=...)."""
        if name in self._inputs:
            raise GraphError(f"duplicate input name {name!r}")
        shape = tuple(int(s) for s in shape)
        if value is not None:
            value = _as_f64(value)
            if value.shape != shape:
                raise GraphError(
                    f"input {name!r}: declared shape {shape}, got {value.shape}"
                )
        node = self._new("input", (), {}, shape, value, name=name)
        self._inputs[name] = node
        return node

    def constant(self, value):
        value = _as_f64(value)
        return self._new("constant", (), {}, value.shape, value)

    def detach(self, node):
        """Copy a node's value into a fresh constant; gradients stop here."""
        if node.value is None:
            raise GraphError(f"detach of unevaluated node #{node.idx}")
        return self.constant(np.array(node.value, dtype=np.float64, copy=True))

    @property
    def params(self):
        return dict(self._params)

    # ------------------------------------------------------------------
    # ops

    def matmul(self, a, b):
        if len(a.shape) != 2 or len(b.shape) != 2:
            raise GraphError(f"matmul node #{len(self.nodes)}: operands must be 2-D, "
                             f"got {a.shape} and {b.shape}")
        if a.shape[1] != b.shape[0]:
            raise GraphError(f"matmul node #{len(self.nodes)}: inner dims "
                             f"{a.shape[1]} != {b.shape[0]}")
        return self._new("matmul", (a, b), {}, (a.shape[0], b.shape[1]))

    def bmm(self, a, b):
        if len(a.shape) != 3 or len(b.shape) != 3:
            raise GraphError(f"bmm node #{len(self.nodes)}: operands must be 3-D")
        if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
            raise GraphError(f"bmm node #{len(self.nodes)}: shapes {a.shape} and "
                             f"{b.shape} do not chain")
        return self._new("bmm", (a, b), {}, (a.shape[0], a.shape[1], b.shape[2]))

    def add(self, a, b):
        if a.shape != b.shape:
            raise GraphError(f"add node #{len(self.nodes)}: shapes {a.shape} != {b.shape}")
        return self._new("add", (a, b), {}, a.shape)

    def sub(self, a, b):
        if a.shape != b.shape:
            raise GraphError(f"sub node #{len(self.nodes)}: shapes {a.shape} != {b.shape}")
        return self._new("sub", (a, b), {}, a.shape)

    def mul(self, a, b):
        if a.shape != b.shape:
            raise GraphError(f"mul node #{len(self.nodes)}: shapes {a.shape} != {b.shape}")
        return self._new("mul", (a, b), {}, a.shape)

    def add_bias(self, x, b):
        """x + b with b broadcast over the leading axes of x."""
        nb = len(b.shape)
        if nb == 0 or nb > len(x.shape) or x.shape[len(x.shape) - nb:] != b.shape:
            raise GraphError(f"add_bias node #{len(self.nodes)}: bias shape {b.shape} "
                             f"is not a trailing slice of {x.shape}")
        return self._new("add_bias", (x, b), {}, x.shape)

    def scale(self, x, c):
        return self._new("scale", (x,), {"c": float(c)}, x.shape)

    def softmax(self, x, axis=-1):
        axis = self._check_axis("softmax", x, axis)
        return self._new("softmax", (x,), {"axis": axis}, x.shape)

    def log_softmax(self, x, axis=-1):
        axis = self._check_axis("log_softmax", x, axis)
        return self._new("log_softmax", (x,), {"axis": axis}, x.shape)

    def gelu(self, x):
        return self._new("gelu", (x,), {}, x.shape)

    def layernorm(self, x, gain, bias):
        d = x.shape[-1] if x.shape else 0
        if gain.shape != (d,) or bias.shape != (d,):
            raise GraphError(f"layernorm node #{len(self.nodes)}: gain/bias must be "
                             f"({d},), got {gain.shape} and {bias.shape}")
        return self._new("layernorm", (x, gain, bias), {}, x.shape)

    def slice_prefix(self, x, axis, extent):
        """View of the first `extent` entries along `axis`; no data copy."""
        axis = self._check_axis("slice_prefix", x, axis)
        extent = int(extent)
        if not 1 <= extent <= x.shape[axis]:
            raise GraphError(f"slice_prefix node #{len(self.nodes)}: extent {extent} "
                             f"out of range for axis {axis} of {x.shape}")
        shape = tuple(extent if i == axis else s for i, s in enumerate(x.shape))
        return self._new("slice_prefix", (x,), {"axis": axis, "extent": extent}, shape)

    def reshape(self, x, shape):
        shape = tuple(int(s) for s in shape)
        if math.prod(shape) != math.prod(x.shape):
            raise GraphError(f"reshape node #{len(self.nodes)}: cannot reshape "
                             f"{x.shape} to {shape}")
        return self._new("reshape", (x,), {"shape": shape}, shape)

    def transpose(self, x, axes):
        axes = tuple(int(a) for a in axes)
        if sorted(axes) != list(range(len(x.shape))):
            raise GraphError(f"transpose node #{len(self.nodes)}: axes {axes} invalid "
                             f"for rank {len(x.shape)}")
        return self._new("transpose", (x,), {"axes": axes},
                         tuple(x.shape[a] for a in axes))

    def mean(self, x, axis=None):
        if axis is None:
            return self._new("mean", (x,), {"axis": None}, ())
        axis = self._check_axis("mean", x, axis)
        shape = tuple(s for i, s in enumerate(x.shape) if i != axis)
        return self._new("mean", (x,), {"axis": axis}, shape)

    def sum(self, x, axis=None):
        if axis is None:
            return self._new("sum", (x,), {"axis": None}, ())
        axis = self._check_axis("sum", x, axis)
        shape = tuple(s for i, s in enumerate(x.shape) if i != axis)
        return self._new("sum", (x,), {"axis": axis}, shape)

    def gather_rows(self, table, ids):
        """Row lookup table[ids]; ids is a plain integer array, not a node."""
        if len(table.shape) != 2:
            raise GraphError(f"gather_rows node #{len(self.nodes)}: table must be 2-D")
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 1:
            raise GraphError(f"gather_rows node #{len(self.nodes)}: ids must be 1-D")
        if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
            raise GraphError(f"gather_rows node #{len(self.nodes)}: ids out of range "
                             f"[0, {table.shape[0]})")
        return self._new("gather_rows", (table,), {"ids": ids},
                         (ids.shape[0], table.shape[1]))

    # ------------------------------------------------------------------
    # execution

    def evaluate(self, outputs=None, feeds=None):
        """Recompute the whole tape, optionally rebinding named inputs.

        Returns the value of `outputs` (a node, or a sequence of nodes).
        """
        feeds = dict(feeds or {})
        for name in feeds:
            if name not in self._inputs:
                raise GraphError(f"unknown input {name!r}")
        for name, node in self._inputs.items():
            if name in feeds:
                value = _as_f64(feeds[name])
                if value.shape != node.shape:
                    raise GraphError(f"input {name!r}: declared shape {node.shape}, "
                                     f"got {value.shape}")
                node.value = value
            elif node.value is None:
                raise GraphError(f"input {name!r} was never bound")
        for node in self.nodes:
            if node.op not in _LEAF_OPS:
                node.value = self._compute(node)
        if outputs is None:
            return None
        if isinstance(outputs, Node):
            return outputs.value
        return [node.value for node in outputs]

    def backward(self, out):
        """Gradient of scalar node `out` with respect to every param leaf."""
        if out.shape != ():
            raise GraphError(f"backward requires a scalar output, node #{out.idx} "
                             f"has shape {out.shape}")
        if out.value is None:
            raise GraphError("backward before forward: output has no value")
        grads: list[np.ndarray | None] = [None] * len(self.nodes)
        grads[out.idx] = np.asarray(1.0, dtype=np.float64)
        for node in reversed(self.nodes):
            g = grads[node.idx]
            if g is None or node.op in _LEAF_OPS:
                continue
            _BACKWARD[node.op](node, g, grads)
        return {
            name: (grads[n.idx] if grads[n.idx] is not None
                   else np.zeros(n.shape, dtype=np.float64))
            for name, n in self._params.items()
        }

    # ------------------------------------------------------------------
    # internals

    def _check_axis(self, opname, x, axis):
        rank = len(x.shape)
        a = axis + rank if axis < 0 else axis
        if not 0 <= a < rank:
            raise GraphError(f"{opname} node #{len(self.nodes)}: axis {axis} invalid "
                             f"for shape {x.shape}")
        return a

    def _new(self, op, parents, attrs, shape, value=None, name=None):
        node = Node(self, len(self.nodes), op, tuple(parents), attrs,
                    tuple(int(s) for s in shape), value, name)
        self.nodes.append(node)
        if op not in _LEAF_OPS and all(p.value is not None for p in node.parents):
            node.value = self._compute(node)
        return node

    def _compute(self, node):
        value = _FORWARD[node.op](node, *[p.value for p in node.parents])
        if not np.all(np.isfinite(value)):
            raise NumericError(f"non-finite output at node #{node.idx} ({node.op})")
        return value


# ----------------------------------------------------------------------
# forward rules


def _move_last(x, axis):
    return x if axis == x.ndim - 1 else np.moveaxis(x, axis, -1)


_FORWARD = {
    "matmul": lambda n, a, b: kernels.matmul(a, b),
    "bmm": lambda n, a, b: kernels.bmm(a, b),
    "add": lambda n, a, b: a + b,
    "sub": lambda n, a, b: a - b,
    "mul": lambda n, a, b: a * b,
    "add_bias": lambda n, x, b: x + b,
    "scale": lambda n, x: x * n.attrs["c"],
    "softmax": lambda n, x: _move_last(
        kernels.softmax(_move_last(x, n.attrs["axis"])), n.attrs["axis"]),
    "log_softmax": lambda n, x: _move_last(
        kernels.log_softmax(_move_last(x, n.attrs["axis"])), n.attrs["axis"]),
    "gelu": lambda n, x: kernels.gelu(x),
    "layernorm": lambda n, x, g, b: kernels.layernorm(x, g, b, LAYERNORM_EPS),
    "slice_prefix": lambda n, x: x[
        tuple(slice(0, n.attrs["extent"]) if i == n.attrs["axis"] else slice(None)
              for i in range(x.ndim))],
    "reshape": lambda n, x: x.reshape(n.attrs["shape"]),
    "transpose": lambda n, x: np.transpose(x, n.attrs["axes"]),
    "mean": lambda n, x: np.asarray(x.mean(axis=n.attrs["axis"])),
    "sum": lambda n, x: np.asarray(x.sum(axis=n.attrs["axis"])),
    "gather_rows": lambda n, t: t[n.attrs["ids"]],
}


# ----------------------------------------------------------------------
# backward rules


def _acc(grads, parent, g):
    if parent.op == "constant":
        return  # constants never need gradients
    g = np.asarray(g, dtype=np.float64)
    if grads[parent.idx] is None:
        grads[parent.idx] = g.copy() if g.base is not None or g is parent.value else g
    else:
        grads[parent.idx] = grads[parent.idx] + g


def _bw_matmul(n, g, grads):
    a, b = n.parents
    _acc(grads, a, kernels.matmul(g, b.value.T))
    _acc(grads, b, kernels.matmul(a.value.T, g))


def _bw_bmm(n, g, grads):
    a, b = n.parents
    _acc(grads, a, kernels.bmm(g, np.transpose(b.value, (0, 2, 1))))
    _acc(grads, b, kernels.bmm(np.transpose(a.value, (0, 2, 1)), g))


def _bw_add(n, g, grads):
    _acc(grads, n.parents[0], g)
    _acc(grads, n.parents[1], g)


def _bw_sub(n, g, grads):
    _acc(grads, n.parents[0], g)
    _acc(grads, n.parents[1], -g)


def _bw_mul(n, g, grads):
    a, b = n.parents
    _acc(grads, a, g * b.value)
    _acc(grads, b, g * a.value)


def _bw_add_bias(n, g, grads):
    x, b = n.parents
    _acc(grads, x, g)
    lead = tuple(range(len(x.shape) - len(b.shape)))
    _acc(grads, b, g.sum(axis=lead) if lead else g)


def _bw_scale(n, g, grads):
    _acc(grads, n.parents[0], g * n.attrs["c"])


def _bw_softmax(n, g, grads):
    axis = n.attrs["axis"]
    y = _move_last(n.value, axis)
    dx = kernels.softmax_backward(y, _move_last(g, axis))
    _acc(grads, n.parents[0], _move_last(dx, axis))


def _bw_log_softmax(n, g, grads):
    axis = n.attrs["axis"]
    y = _move_last(n.value, axis)
    dx = kernels.log_softmax_backward(y, _move_last(g, axis))
    _acc(grads, n.parents[0], _move_last(dx, axis))


def _bw_gelu(n, g, grads):
    _acc(grads, n.parents[0], kernels.gelu_backward(n.parents[0].value, g))


def _bw_layernorm(n, g, grads):
    x, gain, bias = n.parents
    dx, dgain, dbias = kernels.layernorm_backward(x.value, gain.value,
                                                  LAYERNORM_EPS, g)
    _acc(grads, x, dx)
    _acc(grads, gain, dgain)
    _acc(grads, bias, dbias)


def _bw_slice_prefix(n, g, grads):
    parent = n.parents[0]
    full = np.zeros(parent.shape, dtype=np.float64)
    idx = tuple(slice(0, n.attrs["extent"]) if i == n.attrs["axis"] else slice(None)
                for i in range(len(parent.shape)))
    full[idx] = g
    _acc(grads, parent, full)


def _bw_reshape(n, g, grads):
    _acc(grads, n.parents[0], np.asarray(g).reshape(n.parents[0].shape))


def _bw_transpose(n, g, grads):
    inv = np.argsort(n.attrs["axes"])
    _acc(grads, n.parents[0], np.transpose(g, inv))


def _bw_mean(n, g, grads):
    parent = n.parents[0]
    axis = n.attrs["axis"]
    if axis is None:
        _acc(grads, parent, np.full(parent.shape, float(g) / math.prod(parent.shape)))
    else:
        _acc(grads, parent,
             np.expand_dims(g, axis) / parent.shape[axis]
             * np.ones(parent.shape, dtype=np.float64))


def _bw_sum(n, g, grads):
    parent = n.parents[0]
    axis = n.attrs["axis"]
    if axis is None:
        _acc(grads, parent, np.full(parent.shape, float(g)))
    else:
        _acc(grads, parent,
             np.expand_dims(g, axis) * np.ones(parent.shape, dtype=np.float64))


def _bw_gather_rows(n, g, grads):
    parent = n.parents[0]
    full = np.zeros(parent.shape, dtype=np.float64)
    np.add.at(full, n.attrs["ids"], g)
    _acc(grads, parent, full)


_BACKWARD = {
    "matmul": _bw_matmul,
    "bmm": _bw_bmm,
    "add": _bw_add,
    "sub": _bw_sub,
    "mul": _bw_mul,
    "add_bias": _bw_add_bias,
    "scale": _bw_scale,
    "softmax": _bw_softmax,
    "log_softmax": _bw_log_softmax,
    "gelu": _bw_gelu,
    "layernorm": _bw_layernorm,
    "slice_prefix": _bw_slice_prefix,
    "reshape": _bw_reshape,
    "transpose": _bw_transpose,
    "mean": _bw_mean,
    "sum": _bw_sum,
    "gather_rows": _bw_gather_rows,
}
