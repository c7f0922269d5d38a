"""Elastic weight-sharing fine-tuning and sub-network search workbench.

A toy pre-LN transformer encoder becomes a super-network whose
sub-networks (fewer layers, heads, or FFN channels) execute as prefix
slices of shared weights.  Fine-tuning combines cross-entropy with
temperature-scaled distillation from the super-network or a frozen
strong teacher; search then maps the accuracy-vs-MACs Pareto front of
the trained weights with random sampling, an elitist evolutionary
algorithm, or predictor-guided iteration.
"""

__version__ = "0.1.0"

from . import kernels
from .autodiff import Graph, GraphError, Node, NumericError
from .cost import CostReport, DeltaReport, delta, macs, params
from .data import Dataset, DataSplits, label_of, make_dataset, make_splits
from .losses import LossWeights, StepLogits, cross_entropy, elastic_distill_loss, kl_distill
from .model import (ArchDims, SubnetConfig, SupernetParams, active_param_count,
                    build_forward, content_hash, forward, init_supernet,
                    load_checkpoint, maximal_config, save_checkpoint)
from .search import (Candidate, SearchHistory, dominates, hypervolume, linas,
                     nsga2, pareto_front, random_search)
from .space import PRESETS, Preset, SearchSpace, desk_space, get_preset
from .training import (Adam, TeacherRegime, TrainConfig, TrainLog,
                       TrainingError, evaluate, finetune_elastic,
                       pretrain_and_freeze_teacher, sample_subnet, train_plain)
from .experiment import (ExperimentConfig, ResultBundle, export_front,
                         load_bundle, run_experiment)

__all__ = [
    "Adam", "ArchDims", "Candidate", "CostReport", "DataSplits", "Dataset",
    "DeltaReport", "ExperimentConfig", "Graph", "GraphError", "LossWeights",
    "Node", "NumericError", "PRESETS", "Preset", "ResultBundle",
    "SearchHistory", "SearchSpace", "StepLogits", "SubnetConfig",
    "SupernetParams", "TeacherRegime", "TrainConfig", "TrainLog",
    "TrainingError", "active_param_count", "build_forward", "content_hash",
    "cross_entropy", "delta", "desk_space", "dominates",
    "elastic_distill_loss", "evaluate", "export_front", "finetune_elastic",
    "forward", "get_preset", "hypervolume", "init_supernet", "kernels",
    "kl_distill", "label_of", "linas", "load_bundle", "load_checkpoint",
    "macs", "make_dataset", "make_splits", "maximal_config", "nsga2",
    "params", "pareto_front", "pretrain_and_freeze_teacher", "random_search",
    "run_experiment", "sample_subnet", "save_checkpoint", "train_plain",
    "__version__",
]
