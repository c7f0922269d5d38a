"""Elastic fine-tuning loop, plain-trainer warm-up, and evaluation.

Every optimizer step forwards the super-network, forwards M uniformly
sampled sub-networks on the same shared graph, adds the teacher's
frozen logits when the current epoch has the strong teacher active,
and takes a single backward plus one in-place update of the shared
weights.  Three seeds (init, sampling, data) fully determine a run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Graph, NumericError
from .data import DataSplits, Dataset, iterate_batches
from .losses import LossWeights, StepLogits, cross_entropy, elastic_distill_loss
from .model import (SubnetConfig, SupernetParams, build_forward, forward,
                    init_supernet, maximal_config, register_params)
from .space import SearchSpace


class TrainingError(RuntimeError):
    """Raised when training aborts (non-finite loss, bad configuration)."""


@dataclass(frozen=True)
class TeacherRegime:
    """When the strong teacher participates: never, every epoch, or only
    before a boundary epoch (0-indexed)."""

    kind: str = "none"
    boundary: int | None = None

    def __post_init__(self):
        if self.kind not in ("none", "always", "until_epoch"):
            raise ValueError(f"regime kind must be none/always/until_epoch, "
                             f"got {self.kind!r}")
        if self.kind == "until_epoch":
            if self.boundary is None or self.boundary < 0:
                raise ValueError("until_epoch regime needs a boundary epoch >= 0")
        elif self.boundary is not None:
            raise ValueError(f"regime {self.kind!r} takes no boundary")

    def gamma_at(self, epoch: int) -> int:
        if self.kind == "none":
            return 0
        if self.kind == "always":
            return 1
        return 1 if epoch < self.boundary else 0


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a run besides the starting weights.

    The gamma field of `weights` is ignored; the teacher regime decides
    gamma per epoch.
    """

    space: SearchSpace
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weights: LossWeights = LossWeights()
    regime: TeacherRegime = TeacherRegime()
    seed_init: int = 0
    seed_sample: int = 1
    seed_data: int = 2
    probe: SubnetConfig | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    def probe_config(self) -> SubnetConfig:
        return self.probe if self.probe is not None else self.space.minimal_config()

    def weights_at(self, epoch: int) -> LossWeights:
        return replace(self.weights, gamma=self.regime.gamma_at(epoch))


@dataclass
class TrainLog:
    """One record per optimizer step plus one per epoch."""

    steps: list = field(default_factory=list)
    epochs: list = field(default_factory=list)
    teacher_forward_calls: int = 0

    def record_step(self, step, epoch, w: LossWeights, terms, subnet_configs):
        self.steps.append({
            "kind": "step", "step": step, "epoch": epoch,
            "alpha": w.alpha, "gamma": w.gamma, "rho": w.rho,
            "num_subnets": w.num_subnets,
            "terms": dict(terms),
            "subnets": [{"depth": c.depth, "heads": list(c.heads),
                         "ffn": list(c.ffn)} for c in subnet_configs],
        })

    def record_epoch(self, epoch, gamma, supernet_acc, probe_acc):
        self.epochs.append({
            "kind": "epoch", "epoch": epoch, "gamma": gamma,
            "supernet_acc": supernet_acc, "probe_acc": probe_acc,
        })

    def loss_trace(self):
        return [rec["terms"]["total"] for rec in self.steps]

    def save_jsonl(self, path):
        with open(path, "w") as fh:
            for rec in self.steps + self.epochs:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    @classmethod
    def load_jsonl(cls, path):
        log = cls()
        with open(path) as fh:
            for line in fh:
                rec = json.loads(line)
                (log.steps if rec["kind"] == "step" else log.epochs).append(rec)
        return log


class Adam:
    """Adaptive moment estimation with in-place parameter updates."""

    def __init__(self, tensors, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.tensors = tensors
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.t = 0

    def step(self, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.tensors.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def sample_subnet(space: SearchSpace, rng) -> SubnetConfig:
    """One sub-network with every elastic choice uniform over its list."""
    return space.sample(rng)


def teacher_forward(teacher: SupernetParams, tokens) -> np.ndarray:
    """Frozen-teacher logits; separate from the trainable graph."""
    return forward(teacher, maximal_config(teacher.dims), tokens)


def evaluate(params: SupernetParams, config: SubnetConfig, dataset: Dataset,
             batch_size: int = 256) -> float:
    """Fraction of correct argmax predictions on the dataset."""
    correct = 0
    for start in range(0, len(dataset), batch_size):
        tokens = dataset.tokens[start:start + batch_size]
        labels = dataset.labels[start:start + batch_size]
        logits = forward(params, config, tokens)
        correct += int((logits.argmax(axis=1) == labels).sum())
    return correct / len(dataset)


def train_plain(params: SupernetParams, splits: DataSplits,
                config: TrainConfig) -> TrainLog:
    """Ordinary cross-entropy training of the maximal network."""
    dims = params.dims
    maxcfg = maximal_config(dims)
    rng_data = np.random.default_rng(config.seed_data)
    opt = Adam(params.tensors, config.lr, config.beta1, config.beta2,
               config.adam_eps)
    log = TrainLog()
    plain_w = LossWeights(alpha=1.0, gamma=0, rho=config.weights.rho,
                          num_subnets=0)
    step = 0
    for epoch in range(config.epochs):
        for tokens, labels in iterate_batches(splits.train, config.batch_size,
                                              rng_data):
            try:
                g = Graph()
                pnodes = register_params(g, params)
                logits = build_forward(g, pnodes, dims, maxcfg, tokens)
                loss = cross_entropy(g, logits, labels)
                grads = g.backward(loss)
            except NumericError as exc:
                raise TrainingError(f"non-finite loss at step {step}: {exc}") from exc
            opt.step(grads)
            log.record_step(step, epoch, plain_w,
                            {"ce_supernet": float(loss.value),
                             "total": float(loss.value)}, [])
            step += 1
        acc = evaluate(params, maxcfg, splits.val)
        log.record_epoch(epoch, 0, acc, acc)
    return log


def pretrain_and_freeze_teacher(dims, splits: DataSplits, config: TrainConfig):
    """Warm-up run standing in for pre-training; returns the warm-start
    weights and a frozen teacher copy, bit-identical at handoff."""
    params = init_supernet(dims, config.seed_init)
    log = train_plain(params, splits, config)
    return params, params.copy(), log


def finetune_elastic(params: SupernetParams, teacher: SupernetParams | None,
                     splits: DataSplits, config: TrainConfig):
    """Weight-sharing fine-tuning under the combined CE + KL objective.

    Returns the trained params (updated in place) and the TrainLog.
    """
    dims = params.dims
    if config.space.dims != dims:
        raise TrainingError("search space dims do not match the parameters")
    needs_teacher = any(config.regime.gamma_at(e) for e in range(config.epochs))
    if needs_teacher and teacher is None:
        raise TrainingError(f"regime {config.regime.kind!r} requires a teacher")
    maxcfg = maximal_config(dims)
    rng_sample = np.random.default_rng(config.seed_sample)
    rng_data = np.random.default_rng(config.seed_data)
    opt = Adam(params.tensors, config.lr, config.beta1, config.beta2,
               config.adam_eps)
    log = TrainLog()
    probe = config.probe_config()
    step = 0
    for epoch in range(config.epochs):
        w = config.weights_at(epoch)
        for tokens, labels in iterate_batches(splits.train, config.batch_size,
                                              rng_data):
            subnet_cfgs = [sample_subnet(config.space, rng_sample)
                           for _ in range(w.num_subnets)]
            try:
                g = Graph()
                pnodes = register_params(g, params)
                super_logits = build_forward(g, pnodes, dims, maxcfg, tokens)
                sub_logits = [build_forward(g, pnodes, dims, cfg, tokens)
                              for cfg in subnet_cfgs]
                t_logits = None
                if w.gamma == 1:
                    t_logits = teacher_forward(teacher, tokens)
                    log.teacher_forward_calls += 1
                bundle = StepLogits(super_logits, sub_logits, t_logits, labels)
                total, terms = elastic_distill_loss(g, bundle, w)
                grads = g.backward(total)
            except NumericError as exc:
                raise TrainingError(f"non-finite loss at step {step}: {exc}") from exc
            opt.step(grads)
            log.record_step(step, epoch, w, terms, subnet_cfgs)
            step += 1
        log.record_epoch(epoch, w.gamma,
                         evaluate(params, maxcfg, splits.val),
                         evaluate(params, probe, splits.val))
    return params, log
