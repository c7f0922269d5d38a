"""Combined cross-entropy and distillation loss for elastic fine-tuning.

The per-step objective is

    total = alpha * [CE(S) + sum_i CE(S_i)]
          + (1 - alpha) * [gamma * KL(S, T, rho)
                           + sum_i ((1 - gamma) * KL(S_i, S, rho)
                                    + gamma * KL(S_i, T, rho))]

where S is the super-network, S_i the sampled sub-networks, and T the
strong teacher.  KL(student, teacher, rho) is the temperature-scaled
divergence rho^2 * KL(softmax(teacher/rho) || softmax(student/rho)),
averaged over the batch, with the teacher side detached so gradients
flow only into the student.  All CE/KL terms are batch means, keeping
alpha scale-free in the batch size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Graph, GraphError, Node


@dataclass(frozen=True)
class LossWeights:
    """Loss mixing knobs: CE weight, teacher gate, temperature, samples."""

    alpha: float = 0.3
    gamma: int = 0
    rho: float = 1.0
    num_subnets: int = 1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.gamma not in (0, 1):
            raise ValueError(f"gamma must be 0 or 1, got {self.gamma}")
        if self.rho <= 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if self.num_subnets < 0:
            raise ValueError(f"num_subnets must be >= 0, got {self.num_subnets}")


@dataclass
class StepLogits:
    """Logit bundle for one optimizer step.

    supernet/subnets are graph nodes so gradients reach the shared
    weights; teacher logits are plain values (the teacher is frozen).
    """

    supernet: Node
    subnets: list[Node] = field(default_factory=list)
    teacher: np.ndarray | None = None
    labels: np.ndarray = None

    def __post_init__(self):
        shape = self.supernet.shape
        if len(shape) != 2:
            raise GraphError(f"supernet logits must be 2-D, got {shape}")
        for i, node in enumerate(self.subnets):
            if node.shape != shape:
                raise GraphError(f"subnet {i} logits shape {node.shape} != {shape}")
        if self.teacher is not None:
            self.teacher = np.asarray(self.teacher, dtype=np.float64)
            if self.teacher.shape != shape:
                raise GraphError(f"teacher logits shape {self.teacher.shape} != {shape}")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (shape[0],):
            raise GraphError(f"labels must be ({shape[0]},), got {self.labels.shape}")


def _one_hot(labels, classes):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise GraphError(f"labels out of range [0, {classes})")
    out = np.zeros((labels.shape[0], classes), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def cross_entropy(g: Graph, logits: Node, labels) -> Node:
    """Mean negative log-probability of the true class."""
    batch, classes = logits.shape
    picked = g.mul(g.log_softmax(logits, axis=-1),
                   g.constant(_one_hot(labels, classes)))
    return g.scale(g.sum(picked), -1.0 / batch)


def _soft_targets(teacher_values, rho):
    """Temperature-softened teacher distribution and its entropy term."""
    z = np.asarray(teacher_values, dtype=np.float64) / rho
    z = z - z.max(axis=-1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=-1, keepdims=True)
    logp = np.where(p > 0, np.log(np.maximum(p, np.finfo(float).tiny)), 0.0)
    return p, float((p * logp).sum())


def kl_distill(g: Graph, student: Node, teacher, rho: float = 1.0) -> Node:
    """rho^2 * mean-over-batch KL(soft teacher || soft student).

    `teacher` may be a node or an array; either way it is treated as a
    constant, so gradients reach only the student logits.
    """
    if rho <= 0:
        raise GraphError(f"rho must be > 0, got {rho}")
    teacher_values = teacher.value if isinstance(teacher, Node) else np.asarray(teacher)
    if tuple(teacher_values.shape) != student.shape:
        raise GraphError(f"teacher shape {tuple(teacher_values.shape)} != "
                         f"student shape {student.shape}")
    batch = student.shape[0]
    p, entropy = _soft_targets(teacher_values, rho)
    student_log = g.log_softmax(g.scale(student, 1.0 / rho), axis=-1)
    cross = g.sum(g.mul(student_log, g.constant(p)))
    # KL = sum(p log p) - sum(p log q), scaled by rho^2 / batch
    return g.add(g.scale(cross, -rho * rho / batch),
                 g.constant(rho * rho * entropy / batch))


def elastic_distill_loss(g: Graph, step: StepLogits, w: LossWeights):
    """Total loss node plus a name -> value breakdown of every term.

    The super-network acts as teacher for the sub-networks when the
    strong teacher is absent; teacher sides are always detached.
    """
    if w.gamma == 1 and step.teacher is None:
        raise GraphError("gamma=1 requires teacher logits")
    if w.gamma == 0 and step.teacher is not None:
        raise GraphError("teacher logits supplied but gamma=0; the teacher "
                         "forward should not have run")
    if len(step.subnets) != w.num_subnets:
        raise GraphError(f"expected {w.num_subnets} subnet logit sets, "
                         f"got {len(step.subnets)}")

    terms = {}
    ce = cross_entropy(g, step.supernet, step.labels)
    terms["ce_supernet"] = float(ce.value)
    ce_total = ce
    for i, sub in enumerate(step.subnets):
        ce_i = cross_entropy(g, sub, step.labels)
        terms[f"ce_subnet{i}"] = float(ce_i.value)
        ce_total = g.add(ce_total, ce_i)

    kd_total = None

    def kd_add(term):
        nonlocal kd_total
        kd_total = term if kd_total is None else g.add(kd_total, term)

    if w.gamma == 1:
        kl_st = kl_distill(g, step.supernet, step.teacher, w.rho)
        terms["kl_supernet_teacher"] = float(kl_st.value)
        kd_add(kl_st)
        for i, sub in enumerate(step.subnets):
            kl_i = kl_distill(g, sub, step.teacher, w.rho)
            terms[f"kl_subnet{i}_teacher"] = float(kl_i.value)
            kd_add(kl_i)
    else:
        for i, sub in enumerate(step.subnets):
            kl_i = kl_distill(g, sub, step.supernet, w.rho)
            terms[f"kl_subnet{i}_supernet"] = float(kl_i.value)
            kd_add(kl_i)

    total = g.scale(ce_total, w.alpha)
    if kd_total is not None:
        total = g.add(total, g.scale(kd_total, 1.0 - w.alpha))
    terms["total"] = float(total.value)
    return total, terms
