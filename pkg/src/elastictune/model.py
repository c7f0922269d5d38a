"""Elastic transformer encoder executed as sliced views of shared weights.

The super-network is a pre-LN transformer encoder at its maximal
extents.  A sub-network picks an active depth, a head count per layer,
and an FFN width per layer; its forward pass runs on prefix slices of
the shared tensors (first ``h*d_head`` attention columns, first ``f``
FFN channels, first ``depth`` layers) without allocating trainable
storage.  The final LayerNorm and the classifier always apply, and the
classifier reads the mean-pooled sequence representation.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Graph, GraphError

CHECKPOINT_FORMAT = "elastictune-checkpoint-v1"


@dataclass(frozen=True)
class ArchDims:
    """Maximal extents of the elastic encoder."""

    L_max: int
    H_max: int
    d_head: int
    D_in: int
    D_ffn_max: int
    N: int
    V: int
    C: int

    def __post_init__(self):
        for name in ("L_max", "H_max", "d_head", "D_in", "D_ffn_max", "N", "V", "C"):
            if getattr(self, name) < 1:
                raise ValueError(f"ArchDims.{name} must be >= 1")

    @property
    def D_attn(self) -> int:
        return self.H_max * self.d_head


@dataclass(frozen=True)
class SubnetConfig:
    """One sub-network: active depth plus per-layer head and FFN widths."""

    depth: int
    heads: tuple[int, ...]
    ffn: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(int(h) for h in self.heads))
        object.__setattr__(self, "ffn", tuple(int(f) for f in self.ffn))
        if self.depth < 1:
            raise ValueError("SubnetConfig.depth must be >= 1")
        if len(self.heads) != self.depth or len(self.ffn) != self.depth:
            raise ValueError(
                f"SubnetConfig: need {self.depth} per-layer values, got "
                f"{len(self.heads)} heads and {len(self.ffn)} ffn widths")

    @classmethod
    def uniform(cls, depth, heads, ffn):
        return cls(int(depth), (int(heads),) * int(depth), (int(ffn),) * int(depth))

    @property
    def is_uniform(self) -> bool:
        return len(set(self.heads)) == 1 and len(set(self.ffn)) == 1

    def validate(self, dims: ArchDims):
        if self.depth > dims.L_max:
            raise GraphError(f"config depth {self.depth} > L_max {dims.L_max}")
        for j, (h, f) in enumerate(zip(self.heads, self.ffn)):
            if not 1 <= h <= dims.H_max:
                raise GraphError(f"layer {j}: heads {h} outside [1, {dims.H_max}]")
            if not 1 <= f <= dims.D_ffn_max:
                raise GraphError(f"layer {j}: ffn width {f} outside [1, {dims.D_ffn_max}]")


def maximal_config(dims: ArchDims) -> SubnetConfig:
    return SubnetConfig.uniform(dims.L_max, dims.H_max, dims.D_ffn_max)


def _tensor_shapes(dims: ArchDims):
    """Name -> shape for every trainable tensor, in canonical order."""
    shapes = {
        "tok_emb": (dims.V, dims.D_in),
        "pos_emb": (dims.N, dims.D_in),
    }
    for j in range(dims.L_max):
        p = f"layer{j}."
        shapes[p + "q_w"] = (dims.D_in, dims.D_attn)
        shapes[p + "q_b"] = (dims.D_attn,)
        shapes[p + "k_w"] = (dims.D_in, dims.D_attn)
        shapes[p + "k_b"] = (dims.D_attn,)
        shapes[p + "v_w"] = (dims.D_in, dims.D_attn)
        shapes[p + "v_b"] = (dims.D_attn,)
        shapes[p + "o_w"] = (dims.D_attn, dims.D_in)
        shapes[p + "o_b"] = (dims.D_in,)
        shapes[p + "ln1_g"] = (dims.D_in,)
        shapes[p + "ln1_b"] = (dims.D_in,)
        shapes[p + "ffn_w1"] = (dims.D_in, dims.D_ffn_max)
        shapes[p + "ffn_b1"] = (dims.D_ffn_max,)
        shapes[p + "ffn_w2"] = (dims.D_ffn_max, dims.D_in)
        shapes[p + "ffn_b2"] = (dims.D_in,)
        shapes[p + "ln2_g"] = (dims.D_in,)
        shapes[p + "ln2_b"] = (dims.D_in,)
    shapes["ln_f_g"] = (dims.D_in,)
    shapes["ln_f_b"] = (dims.D_in,)
    shapes["head_w"] = (dims.D_in, dims.C)
    shapes["head_b"] = (dims.C,)
    return shapes


@dataclass
class SupernetParams:
    """Shared weight storage for the super-network and all sub-networks."""

    dims: ArchDims
    tensors: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        expected = _tensor_shapes(self.dims)
        if set(self.tensors) != set(expected):
            missing = set(expected) - set(self.tensors)
            extra = set(self.tensors) - set(expected)
            raise ValueError(f"parameter set mismatch: missing {sorted(missing)}, "
                             f"unexpected {sorted(extra)}")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ValueError(f"tensor {name}: shape {self.tensors[name].shape}, "
                                 f"expected {shape}")

    def copy(self) -> "SupernetParams":
        return SupernetParams(self.dims, {k: v.copy() for k, v in self.tensors.items()})

    def total_count(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.tensors[k].ravel() for k in sorted(self.tensors)])


def init_supernet(dims: ArchDims, seed: int) -> SupernetParams:
    """Seeded initialization: fan-in scaled normal weights, zero biases,
    unit LayerNorm gains, unit-normal embeddings."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in _tensor_shapes(dims).items():
        if name.endswith(("_g",)):
            tensors[name] = np.ones(shape, dtype=np.float64)
        elif name.endswith(("_b", "_b1", "_b2")):
            tensors[name] = np.zeros(shape, dtype=np.float64)
        elif name.endswith("emb"):
            tensors[name] = rng.normal(size=shape)
        else:
            tensors[name] = rng.normal(size=shape) / math.sqrt(shape[0])
    return SupernetParams(dims, tensors)


# ----------------------------------------------------------------------
# forward construction


def register_params(g: Graph, params: SupernetParams):
    """Add every shared tensor to the graph as a trainable leaf."""
    return {name: g.param(name, value) for name, value in params.tensors.items()}


def _check_tokens(dims, token_ids):
    token_ids = np.asarray(token_ids, dtype=np.int64)
    if token_ids.ndim != 2 or token_ids.shape[1] != dims.N:
        raise GraphError(f"token batch must be (batch, {dims.N}), got {token_ids.shape}")
    if token_ids.size and (token_ids.min() < 0 or token_ids.max() >= dims.V):
        raise GraphError(f"token ids out of range [0, {dims.V})")
    return token_ids


def build_forward(g: Graph, pnodes, dims: ArchDims, config: SubnetConfig,
                  token_ids, sliced: bool = True):
    """Append a forward pass to `g`; returns the (batch, C) logits node.

    With sliced=False the maximal network is built with no slice ops at
    all, which is the reference path for the weight-sharing identity.
    """
    config.validate(dims)
    if not sliced and config != maximal_config(dims):
        raise GraphError("unsliced forward requires the maximal config")
    token_ids = _check_tokens(dims, token_ids)
    B, N = token_ids.shape
    dh = dims.d_head

    def sl(node, axis, extent):
        if sliced and extent < node.shape[axis]:
            return g.slice_prefix(node, axis, extent)
        return node

    x = g.add(g.gather_rows(pnodes["tok_emb"], token_ids.ravel()),
              g.gather_rows(pnodes["pos_emb"], np.tile(np.arange(N), B)))

    def heads_split(t, h):  # (B*N, h*dh) -> (B*h, N, dh)
        t = g.reshape(t, (B, N, h, dh))
        t = g.transpose(t, (0, 2, 1, 3))
        return g.reshape(t, (B * h, N, dh))

    for j in range(config.depth):
        p = f"layer{j}."
        h, f = config.heads[j], config.ffn[j]
        a = h * dh

        xn = g.layernorm(x, pnodes[p + "ln1_g"], pnodes[p + "ln1_b"])
        q = g.add_bias(g.matmul(xn, sl(pnodes[p + "q_w"], 1, a)),
                       sl(pnodes[p + "q_b"], 0, a))
        k = g.add_bias(g.matmul(xn, sl(pnodes[p + "k_w"], 1, a)),
                       sl(pnodes[p + "k_b"], 0, a))
        v = g.add_bias(g.matmul(xn, sl(pnodes[p + "v_w"], 1, a)),
                       sl(pnodes[p + "v_b"], 0, a))
        q, k, v = heads_split(q, h), heads_split(k, h), heads_split(v, h)
        scores = g.scale(g.bmm(q, g.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(dh))
        ctx = g.bmm(g.softmax(scores, axis=-1), v)          # (B*h, N, dh)
        ctx = g.transpose(g.reshape(ctx, (B, h, N, dh)), (0, 2, 1, 3))
        ctx = g.reshape(ctx, (B * N, a))
        attn = g.add_bias(g.matmul(ctx, sl(pnodes[p + "o_w"], 0, a)),
                          pnodes[p + "o_b"])
        x = g.add(x, attn)

        xn = g.layernorm(x, pnodes[p + "ln2_g"], pnodes[p + "ln2_b"])
        hmid = g.gelu(g.add_bias(g.matmul(xn, sl(pnodes[p + "ffn_w1"], 1, f)),
                                 sl(pnodes[p + "ffn_b1"], 0, f)))
        ffn = g.add_bias(g.matmul(hmid, sl(pnodes[p + "ffn_w2"], 0, f)),
                         pnodes[p + "ffn_b2"])
        x = g.add(x, ffn)

    x = g.layernorm(x, pnodes["ln_f_g"], pnodes["ln_f_b"])
    pooled = g.mean(g.reshape(x, (B, N, dims.D_in)), axis=1)
    return g.add_bias(g.matmul(pooled, pnodes["head_w"]), pnodes["head_b"])


def forward(params: SupernetParams, config: SubnetConfig, token_ids,
            sliced: bool = True) -> np.ndarray:
    """One-shot forward; returns the logits array."""
    g = Graph()
    out = build_forward(g, register_params(g, params), params.dims, config,
                        token_ids, sliced=sliced)
    return out.value


# ----------------------------------------------------------------------
# active-parameter accounting


def active_slices(dims: ArchDims, config: SubnetConfig):
    """Name -> index tuple of the storage a forward under `config` reads.

    Tensors of inactive layers are omitted entirely.
    """
    config.validate(dims)
    full = slice(None)
    out = {"tok_emb": (full, full), "pos_emb": (full, full)}
    for j in range(config.depth):
        p = f"layer{j}."
        a, f = config.heads[j] * dims.d_head, config.ffn[j]
        out[p + "q_w"] = (full, slice(0, a))
        out[p + "q_b"] = (slice(0, a),)
        out[p + "k_w"] = (full, slice(0, a))
        out[p + "k_b"] = (slice(0, a),)
        out[p + "v_w"] = (full, slice(0, a))
        out[p + "v_b"] = (slice(0, a),)
        out[p + "o_w"] = (slice(0, a), full)
        out[p + "o_b"] = (full,)
        out[p + "ln1_g"] = (full,)
        out[p + "ln1_b"] = (full,)
        out[p + "ffn_w1"] = (full, slice(0, f))
        out[p + "ffn_b1"] = (slice(0, f),)
        out[p + "ffn_w2"] = (slice(0, f), full)
        out[p + "ffn_b2"] = (full,)
        out[p + "ln2_g"] = (full,)
        out[p + "ln2_b"] = (full,)
    out["ln_f_g"] = (full,)
    out["ln_f_b"] = (full,)
    out["head_w"] = (full, full)
    out["head_b"] = (full,)
    return out


def active_param_masks(dims: ArchDims, config: SubnetConfig):
    """Boolean mask per tensor, True exactly on the active storage."""
    slices = active_slices(dims, config)
    masks = {}
    for name, shape in _tensor_shapes(dims).items():
        mask = np.zeros(shape, dtype=bool)
        if name in slices:
            mask[slices[name]] = True
        masks[name] = mask
    return masks


def active_param_count(dims: ArchDims, config: SubnetConfig) -> int:
    """Scalars actually touched by a forward pass under `config`,
    tallied from the slice extents."""
    shapes = _tensor_shapes(dims)
    total = 0
    for name, idx in active_slices(dims, config).items():
        extents = [
            s.stop if isinstance(s, slice) and s.stop is not None else dim
            for s, dim in zip(idx, shapes[name])
        ]
        total += math.prod(extents)
    return total


# ----------------------------------------------------------------------
# checkpoints


def save_checkpoint(params: SupernetParams, path):
    """Write a versioned npz archive that round-trips bit-exactly."""
    meta = {
        "format": CHECKPOINT_FORMAT,
        "dims": {k: getattr(params.dims, k)
                 for k in ("L_max", "H_max", "d_head", "D_in", "D_ffn_max",
                           "N", "V", "C")},
    }
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(
            json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
            **params.tensors)


def load_checkpoint(path) -> SupernetParams:
    with np.load(path) as archive:
        if "__meta__" not in archive:
            raise ValueError(f"{path}: not a checkpoint (missing metadata)")
        meta = json.loads(archive["__meta__"].tobytes().decode())
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unsupported format {meta.get('format')!r}")
        dims = ArchDims(**meta["dims"])
        tensors = {k: archive[k] for k in archive.files if k != "__meta__"}
    return SupernetParams(dims, tensors)


def content_hash(params: SupernetParams) -> str:
    """sha256 over tensor names, shapes, and raw little-endian bytes."""
    digest = hashlib.sha256()
    for name in sorted(params.tensors):
        value = np.ascontiguousarray(params.tensors[name], dtype="<f8")
        digest.update(name.encode())
        digest.update(str(value.shape).encode())
        digest.update(value.tobytes())
    return digest.hexdigest()
