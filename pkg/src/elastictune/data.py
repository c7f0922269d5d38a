"""Synthetic marker-counting task for desk-scale training.

Each example is a length-N sequence over a small vocabulary.  Three
marker tokens (ids 1, 2, 3) are scattered among filler tokens; the
4-class label encodes two bits computed from marker counts:

    bit 1: count(marker 1) > count(marker 2)
    bit 0: count(marker 3) >= 2

Labels are sampled uniformly and realized by drawing marker counts
consistent with the chosen bits, so the classes are balanced by
construction.  The rule is a deterministic function of token counts,
which a tiny encoder can learn, while sharper decision boundaries
reward extra capacity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MARKER_A, MARKER_B, MARKER_C = 1, 2, 3
FILLER_START = 4
MIN_SEQ_LEN = 13  # worst-case marker total: 3 + 6 + 4
NUM_CLASSES = 4


@dataclass(frozen=True)
class Dataset:
    tokens: np.ndarray  # (n, N) int64
    labels: np.ndarray  # (n,) int64

    def __len__(self):
        return self.tokens.shape[0]


@dataclass(frozen=True)
class DataSplits:
    train: Dataset
    val: Dataset


def label_of(tokens) -> np.ndarray:
    """Recompute labels from raw sequences (the ground-truth rule)."""
    tokens = np.asarray(tokens)
    a = (tokens == MARKER_A).sum(axis=-1)
    b = (tokens == MARKER_B).sum(axis=-1)
    c = (tokens == MARKER_C).sum(axis=-1)
    return (2 * (a > b) + (c >= 2)).astype(np.int64)


def make_dataset(n: int, seq_len: int, vocab: int, seed: int) -> Dataset:
    """Balanced sample of n labelled sequences."""
    if seq_len < MIN_SEQ_LEN:
        raise ValueError(f"seq_len must be >= {MIN_SEQ_LEN}, got {seq_len}")
    if vocab <= FILLER_START:
        raise ValueError(f"vocab must be > {FILLER_START}, got {vocab}")
    rng = np.random.default_rng(seed)
    tokens = np.empty((n, seq_len), dtype=np.int64)
    labels = rng.integers(0, NUM_CLASSES, size=n)
    for i in range(n):
        bit1, bit0 = labels[i] >> 1, labels[i] & 1
        if bit1:
            count_b = rng.integers(0, 4)
            count_a = count_b + rng.integers(1, 4)
        else:
            count_a = rng.integers(0, 4)
            count_b = count_a + rng.integers(0, 4)
        count_c = rng.integers(2, 5) if bit0 else rng.integers(0, 2)
        row = rng.integers(FILLER_START, vocab, size=seq_len)
        pos = rng.permutation(seq_len)
        row[pos[:count_a]] = MARKER_A
        row[pos[count_a:count_a + count_b]] = MARKER_B
        row[pos[count_a + count_b:count_a + count_b + count_c]] = MARKER_C
        tokens[i] = row
    return Dataset(tokens, labels)


def make_splits(n_train: int, n_val: int, seq_len: int, vocab: int,
                seed: int) -> DataSplits:
    """Disjoint seeded train/val splits."""
    child = np.random.SeedSequence(seed).spawn(2)
    return DataSplits(
        train=make_dataset(n_train, seq_len, vocab, child[0]),
        val=make_dataset(n_val, seq_len, vocab, child[1]),
    )


def iterate_batches(dataset: Dataset, batch_size: int, rng):
    """Shuffled minibatches; the trailing partial batch is kept."""
    order = rng.permutation(len(dataset))
    for start in range(0, len(dataset), batch_size):
        idx = order[start:start + batch_size]
        yield dataset.tokens[idx], dataset.labels[idx]
