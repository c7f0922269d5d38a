"""Timing comparison of the compiled and numpy kernel backends.

Times each primitive at desk-scale shapes and one full elastic
training step, per backend.  Run as:

    python benchmarks/bench_kernels.py [--repeats 20]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from elastictune import kernels
from elastictune.data import make_splits
from elastictune.losses import LossWeights
from elastictune.space import DESK_DIMS, desk_space
from elastictune.training import TrainConfig, finetune_elastic
from elastictune.model import init_supernet


def timeit(fn, repeats):
    fn()  # warm-up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def kernel_cases(rng):
    a = rng.normal(size=(512, 32))
    b = rng.normal(size=(32, 64))
    big_a = rng.normal(size=(512, 512))
    big_b = rng.normal(size=(512, 512))
    bat = rng.normal(size=(128, 16, 8))
    batt = np.ascontiguousarray(bat.transpose(0, 2, 1))
    x = rng.normal(size=(512, 64))
    g = rng.normal(size=(512, 64))
    gain = rng.normal(size=64)
    bias = rng.normal(size=64)
    return [
        ("matmul 512x32x64", lambda: kernels.matmul(a, b)),
        ("matmul 512^3", lambda: kernels.matmul(big_a, big_b)),
        ("bmm 128x16x8x16", lambda: kernels.bmm(bat, batt)),
        ("softmax 512x64", lambda: kernels.softmax(x)),
        ("log_softmax 512x64", lambda: kernels.log_softmax(x)),
        ("gelu 512x64", lambda: kernels.gelu(x)),
        ("layernorm 512x64", lambda: kernels.layernorm(x, gain, bias, 1e-5)),
        ("layernorm_bwd 512x64",
         lambda: kernels.layernorm_backward(x, gain, 1e-5, g)),
    ]


def train_step_case():
    space = desk_space()
    splits = make_splits(64, 32, DESK_DIMS.N, DESK_DIMS.V, seed=0)
    config = TrainConfig(space=space, epochs=1, batch_size=32)

    def run():
        params = init_supernet(DESK_DIMS, seed=0)
        finetune_elastic(params, None, splits, config)

    return run


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    backends = kernels.available_backends()
    rng = np.random.default_rng(0)
    cases = kernel_cases(rng)
    results = {}
    for backend in backends:
        kernels.set_backend(backend)
        results[backend] = [timeit(fn, args.repeats) for _, fn in cases]

    width = max(len(name) for name, _ in cases)
    header = f"{'kernel':<{width}}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'ratio':>9}"
    print(header)
    for i, (name, _) in enumerate(cases):
        row = f"{name:<{width}}"
        for backend in backends:
            row += f"{results[backend][i] * 1e6:>10.1f}us"
        if len(backends) == 2:
            row += f"{results[backends[1]][i] / results[backends[0]][i]:>9.2f}"
        print(row)

    print()
    step = train_step_case()
    for backend in backends:
        kernels.set_backend(backend)
        print(f"elastic epoch (64 samples), {backend}: "
              f"{timeit(step, max(1, args.repeats // 10)) * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
