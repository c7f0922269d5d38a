"""Declarative elastic search spaces and integer encodings.

A space lists the allowed depth, head-count, and FFN-width values and
whether heads/FFN are chosen once per sub-network (uniform mode) or
independently per layer.  Configs are encoded as fixed-length index
vectors ``[depth_idx, head_idx_1..L_max, ffn_idx_1..L_max]``; positions
beyond the active depth carry no information and are canonicalized to
index 0 so encoding equality matches config equality.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .model import ArchDims, SubnetConfig

ENUMERATION_CAP = 10 ** 6


@dataclass(frozen=True)
class SearchSpace:
    dims: ArchDims
    depth_values: tuple[int, ...]
    head_values: tuple[int, ...]
    ffn_values: tuple[int, ...]
    mode: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "depth_values", tuple(int(v) for v in self.depth_values))
        object.__setattr__(self, "head_values", tuple(int(v) for v in self.head_values))
        object.__setattr__(self, "ffn_values", tuple(int(v) for v in self.ffn_values))
        if self.mode not in ("uniform", "per_layer"):
            raise ValueError(f"mode must be 'uniform' or 'per_layer', got {self.mode!r}")
        for label, values, maximum in (
            ("depth", self.depth_values, self.dims.L_max),
            ("head", self.head_values, self.dims.H_max),
            ("ffn", self.ffn_values, self.dims.D_ffn_max),
        ):
            if not values:
                raise ValueError(f"{label} values must be nonempty")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ValueError(f"{label} values must be strictly increasing: {values}")
            if values[0] < 1:
                raise ValueError(f"{label} values must be >= 1: {values}")
            if values[-1] != maximum:
                raise ValueError(f"max {label} value {values[-1]} must equal the "
                                 f"architecture maximum {maximum}")

    # ------------------------------------------------------------------
    # encoding

    @property
    def encoding_length(self) -> int:
        return 1 + 2 * self.dims.L_max

    def encode(self, config: SubnetConfig) -> tuple[int, ...]:
        """Canonical index vector; inactive layer positions are 0."""
        config.validate(self.dims)
        if self.mode == "uniform" and not config.is_uniform:
            raise ValueError(f"non-uniform config in uniform mode: {config}")
        try:
            d = self.depth_values.index(config.depth)
            h = [self.head_values.index(v) for v in config.heads]
            f = [self.ffn_values.index(v) for v in config.ffn]
        except ValueError:
            raise ValueError(f"config {config} uses values outside the space") from None
        pad = [0] * (self.dims.L_max - config.depth)
        return tuple([d] + h + pad + f + pad)

    def decode(self, enc) -> SubnetConfig:
        enc = [int(v) for v in enc]
        if len(enc) != self.encoding_length:
            raise ValueError(f"encoding length {len(enc)}, expected {self.encoding_length}")
        L = self.dims.L_max
        d_idx, h_idx, f_idx = enc[0], enc[1:1 + L], enc[1 + L:]
        if not 0 <= d_idx < len(self.depth_values):
            raise ValueError(f"depth index {d_idx} out of range")
        depth = self.depth_values[d_idx]
        for name, idx, values in (("head", h_idx, self.head_values),
                                  ("ffn", f_idx, self.ffn_values)):
            bad = [i for i in idx[:depth] if not 0 <= i < len(values)]
            if bad:
                raise ValueError(f"{name} index {bad[0]} out of range")
        if self.mode == "uniform":
            if len(set(h_idx[:depth])) > 1 or len(set(f_idx[:depth])) > 1:
                raise ValueError("per-layer indices differ in uniform mode")
        return SubnetConfig(
            depth,
            tuple(self.head_values[i] for i in h_idx[:depth]),
            tuple(self.ffn_values[i] for i in f_idx[:depth]),
        )

    def canonicalize(self, enc) -> tuple[int, ...]:
        return self.encode(self.decode(enc))

    # ------------------------------------------------------------------
    # sampling and enumeration

    def sample(self, rng) -> SubnetConfig:
        """One config with every elastic choice uniform over its list."""
        depth = self.depth_values[rng.integers(len(self.depth_values))]
        if self.mode == "uniform":
            return SubnetConfig.uniform(
                depth,
                self.head_values[rng.integers(len(self.head_values))],
                self.ffn_values[rng.integers(len(self.ffn_values))],
            )
        heads = tuple(self.head_values[i]
                      for i in rng.integers(len(self.head_values), size=depth))
        ffn = tuple(self.ffn_values[i]
                    for i in rng.integers(len(self.ffn_values), size=depth))
        return SubnetConfig(depth, heads, ffn)

    def size(self) -> int:
        if self.mode == "uniform":
            return (len(self.depth_values) * len(self.head_values)
                    * len(self.ffn_values))
        per_layer = len(self.head_values) * len(self.ffn_values)
        return sum(per_layer ** d for d in self.depth_values)

    def enumerate_configs(self, cap: int = ENUMERATION_CAP):
        """Exhaustive duplicate-free config stream; refuses huge spaces."""
        if self.size() > cap:
            raise ValueError(f"space size {self.size()} exceeds the enumeration "
                             f"cap {cap}; not enumerable")
        if self.mode == "uniform":
            for d, h, f in itertools.product(self.depth_values, self.head_values,
                                             self.ffn_values):
                yield SubnetConfig.uniform(d, h, f)
            return
        for d in self.depth_values:
            choices = itertools.product(
                *(self.head_values for _ in range(d)),
                *(self.ffn_values for _ in range(d)))
            for picks in choices:
                yield SubnetConfig(d, picks[:d], picks[d:])

    def minimal_config(self) -> SubnetConfig:
        return SubnetConfig.uniform(self.depth_values[0], self.head_values[0],
                                    self.ffn_values[0])

    def maximal_space_config(self) -> SubnetConfig:
        return SubnetConfig.uniform(self.depth_values[-1], self.head_values[-1],
                                    self.ffn_values[-1])

    # ------------------------------------------------------------------
    # variation operators (canonical encodings in, canonical out)

    def _free_positions(self, depth_idx):
        """Encoding positions an operator may vary, given the depth gene."""
        L = self.dims.L_max
        if self.mode == "uniform":
            return [1, 1 + L]  # first head slot, first ffn slot
        depth = self.depth_values[depth_idx]
        return list(range(1, 1 + depth)) + list(range(1 + L, 1 + L + depth))

    def position_cardinality(self, pos) -> int:
        """Value-list length behind one encoding position."""
        if pos == 0:
            return len(self.depth_values)
        return len(self.head_values) if pos <= self.dims.L_max else len(self.ffn_values)

    def feature_positions(self) -> tuple[int, ...]:
        """Encoding positions that carry independent information: the
        three free genes in uniform mode, everything in per-layer mode."""
        if self.mode == "uniform":
            return (0, 1, 1 + self.dims.L_max)
        return tuple(range(self.encoding_length))

    def mutate(self, enc, rng, p_m: float) -> tuple[int, ...]:
        """Per-gene resample: each free gene is redrawn with probability p_m."""
        enc = list(self.canonicalize(enc))
        if rng.random() < p_m:
            enc[0] = int(rng.integers(len(self.depth_values)))
        for pos in self._free_positions(enc[0]):
            if rng.random() < p_m:
                enc[pos] = int(rng.integers(self.position_cardinality(pos)))
        return self._respread(enc)

    def crossover(self, enc_a, enc_b, rng) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Uniform crossover: each gene swaps between the parents with
        probability 1/2."""
        a = list(self.canonicalize(enc_a))
        b = list(self.canonicalize(enc_b))
        positions = {0}
        positions.update(self._free_positions(a[0]))
        positions.update(self._free_positions(b[0]))
        for pos in sorted(positions):
            if rng.random() < 0.5:
                a[pos], b[pos] = b[pos], a[pos]
        return self._respread(a), self._respread(b)

    def _respread(self, enc):
        """Rebuild the canonical form after operators touched raw genes."""
        L = self.dims.L_max
        depth = self.depth_values[enc[0]]
        if self.mode == "uniform":
            h, f = enc[1], enc[1 + L]
            return tuple([enc[0]] + [h] * depth + [0] * (L - depth)
                         + [f] * depth + [0] * (L - depth))
        head = [enc[1 + j] if j < depth else 0 for j in range(L)]
        ffn = [enc[1 + L + j] if j < depth else 0 for j in range(L)]
        return tuple([enc[0]] + head + ffn)


# ----------------------------------------------------------------------
# presets


@dataclass(frozen=True)
class Preset:
    """Named space plus the cost-report conventions that go with it."""

    name: str
    space: SearchSpace
    include_embeddings: bool = False
    note: str = ""

    @property
    def dims(self) -> ArchDims:
        return self.space.dims


DESK_DIMS = ArchDims(L_max=4, H_max=4, d_head=8, D_in=32, D_ffn_max=64,
                     N=16, V=32, C=4)

_BERT_DIMS = ArchDims(L_max=12, H_max=12, d_head=64, D_in=768, D_ffn_max=3072,
                      N=128, V=30522, C=2)
# Image presets embed pixel patches rather than tokens; V is a placeholder
# the cost model never reads.
_VIT_DIMS = ArchDims(L_max=12, H_max=12, d_head=64, D_in=768, D_ffn_max=3072,
                     N=197, V=1, C=1000)

PRESETS: dict[str, Preset] = {
    "desk": Preset(
        "desk",
        SearchSpace(DESK_DIMS, (3, 4), (2, 3, 4), (32, 48, 64)),
        note="18-config benchmark space trainable in minutes on a CPU"),
    "desk-wide": Preset(
        "desk-wide",
        SearchSpace(DESK_DIMS, (2, 3, 4), (2, 3, 4), (32, 48, 64)),
        note="desk space with an extra depth value for the space-size study"),
    "bert-base": Preset(
        "bert-base",
        SearchSpace(_BERT_DIMS, (6, 7, 8, 9, 10, 11, 12), (6, 8, 10, 12),
                    (1024, 2048, 3072)),
        note="text-classification encoder at sequence length 128; embedding "
             "lookups cost no multiplies"),
    "vit-b16": Preset(
        "vit-b16",
        SearchSpace(_VIT_DIMS, (11, 12), (6, 8, 10, 12), (2048, 2560, 3072)),
        include_embeddings=True,
        note="image encoder over 196 patches plus a class token; the dense "
             "patch projection is counted"),
    "beit3-base": Preset(
        "beit3-base",
        SearchSpace(_VIT_DIMS, (11, 12), (6, 8, 10, 12), (2048, 2560, 3072)),
        include_embeddings=True,
        note="treated as ViT-shaped for cost purposes"),
    "beit3-base-wide": Preset(
        "beit3-base-wide",
        SearchSpace(_VIT_DIMS, (9, 10, 11, 12), (6, 8, 10, 12),
                    (2048, 2560, 3072)),
        include_embeddings=True,
        note="wider depth list for the space-size study"),
}


def get_preset(name: str) -> Preset:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return PRESETS[name]


def desk_space(mode: str = "uniform") -> SearchSpace:
    return replace(PRESETS["desk"].space, mode=mode)
