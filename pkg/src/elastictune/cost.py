"""Closed-form MACs and parameter counts for elastic encoder configs.

MACs count one multiply per multiply-add pair and nothing else:
softmax, LayerNorm, activations, and residual adds are free.  Per
active layer j with attention width a_j = h_j * d_head and sequence
length N, the per-sequence counts are

    qkv        = 3 * N * D_in * a_j
    scores     = N^2 * a_j
    context    = N^2 * a_j
    projection = N * a_j * D_in
    ffn        = 2 * N * D_in * f_j

Token-embedding lookups cost no multiplies; image-style presets add a
dense input projection of N * D_in^2 when the embeddings flag is set.
The classifier reads one pooled vector, D_in * C multiplies, behind its
own flag.  Both flags default to off, which reproduces the reference
text-encoder total exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import ArchDims, SubnetConfig

LAYER_BLOCKS = ("qkv", "scores", "context", "projection", "ffn")


@dataclass(frozen=True)
class CostReport:
    macs: int
    params: int
    per_layer: tuple[dict, ...]
    embeddings: int
    classifier: int
    include_embeddings: bool
    include_classifier: bool
    config: SubnetConfig = field(repr=False, default=None)

    def block_totals(self) -> dict:
        totals = {name: sum(layer[name] for layer in self.per_layer)
                  for name in LAYER_BLOCKS}
        totals["embeddings"] = self.embeddings
        totals["classifier"] = self.classifier
        return totals

    def to_json(self) -> dict:
        return {
            "macs": self.macs,
            "params": self.params,
            "per_layer": [dict(layer) for layer in self.per_layer],
            "embeddings": self.embeddings,
            "classifier": self.classifier,
            "include_embeddings": self.include_embeddings,
            "include_classifier": self.include_classifier,
        }


@dataclass(frozen=True)
class DeltaReport:
    """Relative percentage difference versus a baseline.

    delta_mac > 0 means the sub-network is cheaper; delta_acc < 0 means
    it beat the baseline accuracy.
    """

    delta_mac: float
    delta_acc: float


def macs(dims: ArchDims, config: SubnetConfig, include_embeddings: bool = False,
         include_classifier: bool = False) -> CostReport:
    """Exact per-sequence multiply count for one sub-network."""
    config.validate(dims)
    N, D = dims.N, dims.D_in
    per_layer = []
    for h, f in zip(config.heads, config.ffn):
        a = h * dims.d_head
        per_layer.append({
            "qkv": 3 * N * D * a,
            "scores": N * N * a,
            "context": N * N * a,
            "projection": N * a * D,
            "ffn": 2 * N * D * f,
        })
    embeddings = N * D * D if include_embeddings else 0
    classifier = D * dims.C if include_classifier else 0
    total = sum(sum(layer.values()) for layer in per_layer) + embeddings + classifier
    return CostReport(
        macs=total,
        params=params(dims, config),
        per_layer=tuple(per_layer),
        embeddings=embeddings,
        classifier=classifier,
        include_embeddings=include_embeddings,
        include_classifier=include_classifier,
        config=config,
    )


def params(dims: ArchDims, config: SubnetConfig) -> int:
    """Active trainable scalars; matches the model's slice-extent tally."""
    config.validate(dims)
    D = dims.D_in
    total = dims.V * D + dims.N * D          # embeddings
    for h, f in zip(config.heads, config.ffn):
        a = h * dims.d_head
        total += 3 * (D * a + a)             # q/k/v weights and biases
        total += a * D + D                   # output projection
        total += 2 * D * f + f + D           # ffn maps and biases
        total += 4 * D                       # two LayerNorm pairs
    total += 2 * D                           # final LayerNorm
    total += D * dims.C + dims.C             # classifier
    return total


def delta(baseline: tuple, subnet: tuple) -> DeltaReport:
    """Percentage reductions of (accuracy, macs) pairs versus baseline."""
    acc_base, mac_base = baseline
    acc_sub, mac_sub = subnet
    if mac_base <= 0:
        raise ValueError(f"baseline macs must be positive, got {mac_base}")
    if acc_base <= 0:
        raise ValueError(f"baseline accuracy must be positive, got {acc_base}")
    return DeltaReport(
        delta_mac=100.0 * (mac_base - mac_sub) / mac_base,
        delta_acc=100.0 * (acc_base - acc_sub) / acc_base,
    )
