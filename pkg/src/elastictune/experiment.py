"""Config-driven experiment pipeline and result bundles.

One YAML config fully determines a run: architecture/space (preset name
or explicit lists), data sizes and seed, training hyperparameters, and
the search settings.  ``run_experiment`` executes the stages the
experiment kind needs (warm-up, elastic fine-tuning, search, export)
and writes a bundle: config snapshot, checkpoints, JSONL logs, front
CSV, plot-ready CSVs, and a summary JSON whose delta columns can be
recomputed from raw numbers at load time.

Summaries and CSVs contain no timestamps or absolute paths, so a rerun
from the same config and seeds is byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field, replace

import yaml

from . import cost, search as mo
from .data import make_splits
from .losses import LossWeights
from .model import (ArchDims, content_hash, load_checkpoint, maximal_config,
                    save_checkpoint)
from .search import make_subnet_evaluator
from .space import PRESETS, SearchSpace, get_preset
from .training import (TeacherRegime, TrainConfig, TrainLog, evaluate,
                       finetune_elastic, pretrain_and_freeze_teacher)

EXPERIMENT_KINDS = ("finetune", "search", "cost", "ablation-teacher",
                    "ablation-space", "ablation-epochs")
OUT_ROOT_ENV = "ELASTICTUNE_OUT_ROOT"
FRONT_COLUMNS = ("encoding", "depth", "heads", "ffn", "accuracy", "macs",
                 "delta_mac", "delta_acc")


class ConfigError(ValueError):
    """Invalid experiment configuration; nothing was executed."""


class StageError(RuntimeError):
    """A pipeline stage failed after the bundle directory was created."""


def _take(section: dict, where: str, allowed: dict):
    """Pop known keys with defaults; reject anything else."""
    section = dict(section or {})
    out = {}
    for key, default in allowed.items():
        out[key] = section.pop(key, default)
    if section:
        raise ConfigError(f"unknown keys in {where}: {sorted(section)}")
    return out


@dataclass(frozen=True)
class DataConfig:
    n_train: int = 2048
    n_val: int = 512
    seed: int = 99

    def __post_init__(self):
        if self.n_train < 1 or self.n_val < 1:
            raise ConfigError("data sizes must be >= 1")


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 20
    warmup_epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    alpha: float = 0.3
    rho: float = 1.0
    num_subnets: int = 1
    teacher_kind: str = "none"
    teacher_boundary: int | None = None
    seed_init: int = 0
    seed_sample: int = 1
    seed_data: int = 2

    def regime(self) -> TeacherRegime:
        return TeacherRegime(self.teacher_kind, self.teacher_boundary)

    def train_config(self, space: SearchSpace, epochs=None,
                     regime=None) -> TrainConfig:
        return TrainConfig(
            space=space,
            epochs=self.epochs if epochs is None else epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            weights=LossWeights(self.alpha, 0, self.rho, self.num_subnets),
            regime=self.regime() if regime is None else regime,
            seed_init=self.seed_init,
            seed_sample=self.seed_sample,
            seed_data=self.seed_data,
        )


@dataclass(frozen=True)
class SearchSection:
    algorithm: str = "nsga2"
    budget: int = 36
    population: int = 12
    generations: int = 10
    batch: int = 10
    inner_population: int = 20
    inner_generations: int = 20
    ridge: float = 1e-3
    mutation: float | None = None
    seed: int = 0
    ref_point: tuple | None = None

    def __post_init__(self):
        if self.algorithm not in ("random", "nsga2", "linas"):
            raise ConfigError(f"unknown search algorithm {self.algorithm!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    preset: str | None = None
    space: SearchSpace | None = None
    compare_preset: str | None = None
    data: DataConfig = DataConfig()
    train: TrainSection = TrainSection()
    search: SearchSection = SearchSection()

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; "
                              f"expected one of {EXPERIMENT_KINDS}")
        if (self.preset is None) == (self.space is None):
            raise ConfigError("exactly one of 'preset' and 'space' is required")
        if self.compare_preset is not None and self.kind != "ablation-space":
            raise ConfigError("compare_preset is only valid for ablation-space")

    def resolved_space(self) -> SearchSpace:
        return get_preset(self.preset).space if self.preset else self.space

    def cost_flags(self) -> dict:
        if self.preset:
            p = get_preset(self.preset)
            return {"include_embeddings": p.include_embeddings,
                    "include_classifier": False}
        return {"include_embeddings": False, "include_classifier": False}

    # ------------------------------------------------------------------
    # serialization

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        top = _take(raw, "config", {
            "kind": None, "preset": None, "space": None,
            "compare_preset": None, "data": {}, "train": {}, "search": {},
        })
        if top["kind"] is None:
            raise ConfigError("config requires a 'kind'")
        space = None
        if top["space"] is not None:
            sd = _take(top["space"], "space", {
                "dims": None, "depth_values": None, "head_values": None,
                "ffn_values": None, "mode": "uniform",
            })
            if sd["dims"] is None:
                raise ConfigError("space requires 'dims'")
            dims = ArchDims(**_take(sd["dims"], "space.dims", {
                k: None for k in ("L_max", "H_max", "d_head", "D_in",
                                  "D_ffn_max", "N", "V", "C")}))
            for key in ("depth_values", "head_values", "ffn_values"):
                if sd[key] is None:
                    raise ConfigError(f"space requires '{key}'")
            space = SearchSpace(dims, tuple(sd["depth_values"]),
                                tuple(sd["head_values"]),
                                tuple(sd["ffn_values"]), sd["mode"])
        tr = _take(top["train"], "train", {
            "epochs": 20, "warmup_epochs": 20, "batch_size": 32, "lr": 1e-3,
            "alpha": 0.3, "rho": 1.0, "num_subnets": 1,
            "teacher": {"kind": "none"},
            "seed_init": 0, "seed_sample": 1, "seed_data": 2,
        })
        teacher = _take(tr.pop("teacher") or {"kind": "none"}, "train.teacher",
                        {"kind": "none", "boundary": None})
        se = _take(top["search"], "search", {
            "algorithm": "nsga2", "budget": 36, "population": 12,
            "generations": 10, "batch": 10, "inner_population": 20,
            "inner_generations": 20, "ridge": 1e-3, "mutation": None,
            "seed": 0, "ref_point": None,
        })
        if se["ref_point"] is not None:
            se["ref_point"] = tuple(se["ref_point"])
        try:
            return cls(
                kind=top["kind"], preset=top["preset"], space=space,
                compare_preset=top["compare_preset"],
                data=DataConfig(**_take(top["data"], "data", {
                    "n_train": 2048, "n_val": 512, "seed": 99})),
                train=TrainSection(teacher_kind=teacher["kind"],
                                   teacher_boundary=teacher["boundary"], **tr),
                search=SearchSection(**se),
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.preset:
            out["preset"] = self.preset
        else:
            out["space"] = {
                "dims": asdict(self.space.dims),
                "depth_values": list(self.space.depth_values),
                "head_values": list(self.space.head_values),
                "ffn_values": list(self.space.ffn_values),
                "mode": self.space.mode,
            }
        if self.compare_preset:
            out["compare_preset"] = self.compare_preset
        tr = asdict(self.train)
        tr["teacher"] = {"kind": tr.pop("teacher_kind")}
        boundary = tr.pop("teacher_boundary")
        if boundary is not None:
            tr["teacher"]["boundary"] = boundary
        out["data"] = asdict(self.data)
        out["train"] = tr
        se = asdict(self.search)
        if se["ref_point"] is None:
            del se["ref_point"]
        else:
            se["ref_point"] = list(se["ref_point"])
        if se["mutation"] is None:
            del se["mutation"]
        out["search"] = se
        return out

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        return cls.from_dict(raw)

    def save(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)


@dataclass
class ResultBundle:
    config: ExperimentConfig
    out_dir: str
    summary: dict
    files: dict = field(default_factory=dict)

    def path(self, name):
        return os.path.join(self.out_dir, name)


# ----------------------------------------------------------------------
# CSV emission


def _format_cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def front_rows(space: SearchSpace, front, baseline):
    """Table rows for the front plus the baseline, MACs ascending."""
    acc_base, mac_base = baseline
    rows = []
    seen_baseline = False
    base_enc = space.encode(maximal_config(space.dims))
    for cand in front:
        config = space.decode(cand.encoding)
        d = cost.delta((acc_base, mac_base), (cand.accuracy, cand.macs))
        if cand.encoding == base_enc and cand.accuracy == acc_base \
                and cand.macs == mac_base:
            seen_baseline = True
        rows.append(["-".join(map(str, cand.encoding)), config.depth,
                     "-".join(map(str, config.heads)),
                     "-".join(map(str, config.ffn)),
                     cand.accuracy, cand.macs, d.delta_mac, d.delta_acc])
    if not seen_baseline:
        base_cfg = space.decode(base_enc)
        rows.append(["-".join(map(str, base_enc)), base_cfg.depth,
                     "-".join(map(str, base_cfg.heads)),
                     "-".join(map(str, base_cfg.ffn)),
                     acc_base, mac_base, 0.0, 0.0])
    rows.sort(key=lambda r: (r[5], -r[4]))
    return rows


def export_front(space: SearchSpace, front, baseline, path):
    """Front CSV in the reporting shape: one row per member plus the
    baseline, deltas computed against the baseline."""
    _write_csv(path, FRONT_COLUMNS, front_rows(space, front, baseline))


def emit_hypervolume_csv(histories: dict, path):
    """One row per evaluation per (algorithm, seed) run."""
    rows = []
    for (algorithm, seed), history in sorted(histories.items()):
        for rec in history.records:
            rows.append([algorithm, seed, rec["eval_index"],
                         rec["iteration"], rec["source"], rec["hypervolume"]])
    _write_csv(path, ("algorithm", "seed", "eval_index", "iteration",
                      "source", "hypervolume"), rows)


def emit_epochs_csv(logs: dict, path):
    """Per-epoch accuracy curves, one row per (arm, epoch)."""
    rows = []
    for arm, log in sorted(logs.items()):
        for rec in log.epochs:
            rows.append([arm, rec["epoch"], rec["gamma"],
                         rec["supernet_acc"], rec["probe_acc"]])
    _write_csv(path, ("arm", "epoch", "gamma", "supernet_acc", "probe_acc"),
               rows)


# ----------------------------------------------------------------------
# pipeline stages


def _train_pipeline(config: ExperimentConfig, space: SearchSpace,
                    out_dir: str, tag: str = "", regime=None, epochs=None):
    """Warm-up plus elastic fine-tuning; returns params, teacher, logs."""
    dims = space.dims
    splits = make_splits(config.data.n_train, config.data.n_val, dims.N,
                         dims.V, config.data.seed)
    tr = config.train
    warm_cfg = tr.train_config(space, epochs=tr.warmup_epochs,
                               regime=TeacherRegime("none"))
    params, teacher, warm_log = pretrain_and_freeze_teacher(dims, splits,
                                                            warm_cfg)
    elastic_cfg = tr.train_config(space, epochs=epochs, regime=regime)
    params, elastic_log = finetune_elastic(params, teacher, splits,
                                           elastic_cfg)
    suffix = f"-{tag}" if tag else ""
    save_checkpoint(params, os.path.join(out_dir, f"checkpoint{suffix}.npz"))
    save_checkpoint(teacher, os.path.join(out_dir, f"teacher{suffix}.npz"))
    elastic_log.save_jsonl(os.path.join(out_dir, f"trainlog{suffix}.jsonl"))
    return params, teacher, splits, warm_log, elastic_log


def _run_search(config: ExperimentConfig, space: SearchSpace, evaluator):
    se = config.search
    ref = se.ref_point
    if se.algorithm == "random":
        return mo.random_search(space, evaluator, se.budget, se.seed, ref)
    if se.algorithm == "nsga2":
        return mo.nsga2(space, evaluator, se.population, se.generations,
                        se.mutation, se.seed, ref)
    return mo.linas(space, evaluator, se.budget, se.batch,
                    se.inner_population, se.inner_generations, se.ridge,
                    se.seed, ref)


def _baseline_metrics(params, splits, flags):
    maxcfg = maximal_config(params.dims)
    acc = evaluate(params, maxcfg, splits.val)
    report = cost.macs(params.dims, maxcfg, **flags)
    return acc, report.macs


def _summary_front(space, front, baseline):
    rows = front_rows(space, front, baseline)
    return [dict(zip(FRONT_COLUMNS, row)) for row in rows]


def _base_summary(config: ExperimentConfig) -> dict:
    return {
        "kind": config.kind,
        "config": config.to_dict(),
        "status": "complete",
    }


# ----------------------------------------------------------------------
# experiment kinds


def _run_cost(config, space, out_dir):
    flags = config.cost_flags()
    report = cost.macs(space.dims, maximal_config(space.dims), **flags)
    summary = _base_summary(config)
    summary["baseline"] = {"macs": report.macs, "params": report.params}
    summary["cost_report"] = report.to_json()
    with open(os.path.join(out_dir, "cost.json"), "w") as fh:
        json.dump(report.to_json(), fh, sort_keys=True, indent=2)
    return summary


def _run_finetune(config, space, out_dir):
    params, teacher, splits, warm_log, elastic_log = _train_pipeline(
        config, space, out_dir)
    flags = config.cost_flags()
    acc, macs_base = _baseline_metrics(params, splits, flags)
    emit_epochs_csv({"elastic": elastic_log},
                    os.path.join(out_dir, "epochs.csv"))
    summary = _base_summary(config)
    summary.update({
        "baseline": {"accuracy": acc, "macs": macs_base},
        "checkpoint_hash": content_hash(params),
        "teacher_hash": content_hash(teacher),
        "final_epoch": elastic_log.epochs[-1],
        "teacher_forward_calls": elastic_log.teacher_forward_calls,
        "loss_first_epoch": _epoch_mean_loss(elastic_log, 0),
        "loss_last_epoch": _epoch_mean_loss(elastic_log,
                                            config.train.epochs - 1),
    })
    return summary


def _epoch_mean_loss(log: TrainLog, epoch: int) -> float:
    losses = [r["terms"]["total"] for r in log.steps if r["epoch"] == epoch]
    return sum(losses) / len(losses) if losses else float("nan")


def _run_search_kind(config, space, out_dir):
    summary = _run_finetune(config, space, out_dir)
    params = load_checkpoint(os.path.join(out_dir, "checkpoint.npz"))
    splits = make_splits(config.data.n_train, config.data.n_val,
                         space.dims.N, space.dims.V, config.data.seed)
    flags = config.cost_flags()
    evaluator = make_subnet_evaluator(params, splits.val, **flags)
    history = _run_search(config, space, evaluator)
    history.save_jsonl(os.path.join(out_dir, "search.jsonl"))
    baseline = (summary["baseline"]["accuracy"], summary["baseline"]["macs"])
    front = history.front()
    export_front(space, front, baseline, os.path.join(out_dir, "front.csv"))
    emit_hypervolume_csv({(history.algorithm, config.search.seed): history},
                         os.path.join(out_dir, "hypervolume.csv"))
    summary["search"] = {
        "algorithm": history.algorithm,
        "evaluations": len(history.records),
        "final_hypervolume": history.final_hypervolume(),
        "ref_point": list(history.ref_point),
    }
    summary["front"] = _summary_front(space, front, baseline)
    return summary


def _run_ablation_teacher(config, space, out_dir):
    """Two arms with identical seeds: strong teacher active vs absent."""
    if config.train.teacher_kind == "none":
        raise ConfigError("ablation-teacher needs a teacher regime to "
                          "compare against (kind always or until_epoch)")
    logs = {}
    summary = _base_summary(config)
    summary["arms"] = {}
    for arm, regime in (("teacher", config.train.regime()),
                        ("no-teacher", TeacherRegime("none"))):
        params, teacher, splits, _, elog = _train_pipeline(
            config, space, out_dir, tag=arm, regime=regime)
        logs[arm] = elog
        acc, macs_base = _baseline_metrics(params, splits,
                                           config.cost_flags())
        summary["arms"][arm] = {
            "supernet_acc": elog.epochs[-1]["supernet_acc"],
            "probe_acc": elog.epochs[-1]["probe_acc"],
            "teacher_forward_calls": elog.teacher_forward_calls,
            "gamma_by_epoch": [rec["gamma"] for rec in elog.epochs],
            "baseline": {"accuracy": acc, "macs": macs_base},
        }
    emit_epochs_csv(logs, os.path.join(out_dir, "epochs.csv"))
    return summary


def _run_ablation_space(config, space, out_dir):
    """Front comparison between the configured space and a wider one."""
    if config.preset is None:
        raise ConfigError("ablation-space requires named presets")
    compare = config.compare_preset or config.preset + "-wide"
    if compare not in PRESETS:
        raise ConfigError(f"no comparison preset {compare!r}; set "
                          f"compare_preset explicitly")
    summary = _base_summary(config)
    summary["spaces"] = {}
    rows = []
    for name in (config.preset, compare):
        sub_space = get_preset(name).space
        sub = replace(config, kind="search", preset=name, compare_preset=None)
        params, teacher, splits, _, elog = _train_pipeline(
            sub, sub_space, out_dir, tag=name)
        flags = sub.cost_flags()
        baseline = _baseline_metrics(params, splits, flags)
        evaluator = make_subnet_evaluator(params, splits.val, **flags)
        history = _run_search(sub, sub_space, evaluator)
        front = history.front()
        export_front(sub_space, front, baseline,
                     os.path.join(out_dir, f"front-{name}.csv"))
        summary["spaces"][name] = {
            "size": sub_space.size(),
            "front": _summary_front(sub_space, front, baseline),
            "baseline": {"accuracy": baseline[0], "macs": baseline[1]},
        }
        for row in front_rows(sub_space, front, baseline):
            rows.append([name] + row)
    _write_csv(os.path.join(out_dir, "spaces.csv"),
               ("space",) + FRONT_COLUMNS, rows)
    return summary


def _run_ablation_epochs(config, space, out_dir):
    """Duration study: per-epoch accuracy of one elastic run."""
    params, teacher, splits, _, elog = _train_pipeline(config, space, out_dir)
    emit_epochs_csv({"elastic": elog}, os.path.join(out_dir, "epochs.csv"))
    summary = _base_summary(config)
    summary["epochs"] = elog.epochs
    summary["baseline"] = dict(zip(
        ("accuracy", "macs"),
        _baseline_metrics(params, splits, config.cost_flags())))
    return summary


_RUNNERS = {
    "cost": _run_cost,
    "finetune": _run_finetune,
    "search": _run_search_kind,
    "ablation-teacher": _run_ablation_teacher,
    "ablation-space": _run_ablation_space,
    "ablation-epochs": _run_ablation_epochs,
}


def default_out_dir(config: ExperimentConfig) -> str:
    root = os.environ.get(OUT_ROOT_ENV, "runs")
    label = config.preset or "custom"
    return os.path.join(root, f"{config.kind}-{label}")


def run_experiment(config, out_dir: str | None = None) -> ResultBundle:
    """Execute an experiment end to end and write its bundle."""
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.load(config)
    space = config.resolved_space()
    out_dir = out_dir or default_out_dir(config)
    os.makedirs(out_dir, exist_ok=True)
    config.save(os.path.join(out_dir, "config.yaml"))
    try:
        summary = _RUNNERS[config.kind](config, space, out_dir)
    except ConfigError:
        raise
    except Exception as exc:
        partial = _base_summary(config)
        partial["status"] = "incomplete"
        partial["error"] = f"{type(exc).__name__}: {exc}"
        _write_summary(partial, out_dir)
        raise StageError(f"{config.kind} failed: {exc}") from exc
    _write_summary(summary, out_dir)
    return ResultBundle(config, out_dir, summary,
                        files={"summary": "summary.json"})


def _write_summary(summary, out_dir):
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")


def emit_plot_data(bundle: ResultBundle, out_dir: str | None = None) -> list:
    """Regenerate the figure CSVs a bundle supports; returns the paths.

    Raises ValueError naming the missing stages when the bundle is
    incomplete for its experiment kind.
    """
    from .search import SearchHistory

    out_dir = out_dir or bundle.out_dir
    os.makedirs(out_dir, exist_ok=True)
    kind = bundle.config.kind
    summary = bundle.summary
    if summary.get("status") != "complete":
        raise ValueError(f"bundle is incomplete "
                         f"({summary.get('error', 'no error recorded')})")
    missing = []
    written = []

    def need(name):
        path = bundle.path(name)
        if not os.path.exists(path):
            missing.append(name)
            return None
        return path

    if kind == "search":
        search_path = need("search.jsonl")
        if "front" not in summary:
            missing.append("summary front")
        if not missing:
            rows = [[row[c] for c in FRONT_COLUMNS] for row in summary["front"]]
            front_path = os.path.join(out_dir, "front.csv")
            _write_csv(front_path, FRONT_COLUMNS, rows)
            written.append(front_path)
            history = SearchHistory.load_jsonl(search_path)
            hv_path = os.path.join(out_dir, "hypervolume.csv")
            emit_hypervolume_csv(
                {(history.algorithm, bundle.config.search.seed): history},
                hv_path)
            written.append(hv_path)
    elif kind in ("finetune", "ablation-epochs"):
        log_path = need("trainlog.jsonl")
        if not missing:
            path = os.path.join(out_dir, "epochs.csv")
            emit_epochs_csv({"elastic": TrainLog.load_jsonl(log_path)}, path)
            written.append(path)
    elif kind == "ablation-teacher":
        logs = {}
        for arm in ("teacher", "no-teacher"):
            log_path = need(f"trainlog-{arm}.jsonl")
            if log_path:
                logs[arm] = TrainLog.load_jsonl(log_path)
        if not missing:
            path = os.path.join(out_dir, "epochs.csv")
            emit_epochs_csv(logs, path)
            written.append(path)
    elif kind == "ablation-space":
        if "spaces" not in summary:
            missing.append("summary spaces")
        if not missing:
            rows = []
            for name, entry in sorted(summary["spaces"].items()):
                for row in entry["front"]:
                    rows.append([name] + [row[c] for c in FRONT_COLUMNS])
            path = os.path.join(out_dir, "spaces.csv")
            _write_csv(path, ("space",) + FRONT_COLUMNS, rows)
            written.append(path)
    else:
        raise ValueError(f"experiment kind {kind!r} emits no plot data")
    if missing:
        raise ValueError(f"bundle at {bundle.out_dir} is missing stages "
                         f"for kind {kind!r}: {missing}")
    return written


def load_bundle(out_dir) -> ResultBundle:
    """Reload a bundle and verify the stored deltas against recomputation."""
    with open(os.path.join(out_dir, "summary.json")) as fh:
        summary = json.load(fh)
    config = ExperimentConfig.load(os.path.join(out_dir, "config.yaml"))
    fronts = []
    if "front" in summary:
        fronts.append((summary["front"], summary["baseline"]))
    for entry in summary.get("spaces", {}).values():
        fronts.append((entry["front"], entry["baseline"]))
    for front, baseline in fronts:
        base = (baseline["accuracy"], baseline["macs"])
        for row in front:
            d = cost.delta(base, (row["accuracy"], row["macs"]))
            if d.delta_mac != row["delta_mac"] or d.delta_acc != row["delta_acc"]:
                raise ValueError(
                    f"{out_dir}: stored deltas for encoding {row['encoding']} "
                    f"do not match recomputation")
    return ResultBundle(config, out_dir, summary,
                        files={"summary": "summary.json"})
