"""Multi-objective sub-network search: random, evolutionary, and
predictor-guided.

Objectives are (maximize accuracy, minimize MACs).  All algorithms
share an evaluation cache so no encoding is scored twice in a run, and
every evaluation appends a history record carrying the hypervolume of
the front found so far, which makes the per-evaluation hypervolume
trace non-decreasing by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import cost
from .space import SearchSpace

RANDOM_RETRY_CAP = 1000


@dataclass(frozen=True)
class Candidate:
    encoding: tuple[int, ...]
    accuracy: float
    macs: int
    eval_index: int

    @property
    def objectives(self) -> tuple[float, float]:
        return (self.accuracy, float(self.macs))


def dominates(a: Candidate, b: Candidate) -> bool:
    """a is at least as accurate and at most as costly, one strictly."""
    return (a.accuracy >= b.accuracy and a.macs <= b.macs
            and (a.accuracy > b.accuracy or a.macs < b.macs))


def pareto_front(candidates) -> list[Candidate]:
    """Non-dominated subset, sorted by MACs ascending; insertion order
    breaks objective ties."""
    pool = list(candidates)
    order = sorted(range(len(pool)),
                   key=lambda i: (pool[i].macs, -pool[i].accuracy, i))
    front = []
    best_acc = -np.inf
    best_macs = None
    for i in order:
        c = pool[i]
        if c.accuracy > best_acc:
            best_acc, best_macs = c.accuracy, c.macs
            front.append(c)
        elif c.accuracy == best_acc and c.macs == best_macs:
            front.append(c)  # objective tie: neither dominates
    return front


def hypervolume(front, ref: tuple[float, float]) -> float:
    """Area dominated by the front relative to (acc_ref, mac_ref).

    Dominated members are excluded first; every surviving member must
    strictly dominate the reference point.
    """
    acc_ref, mac_ref = float(ref[0]), float(ref[1])
    members = pareto_front(front)
    for c in members:
        if not (c.accuracy > acc_ref and c.macs < mac_ref):
            raise ValueError(
                f"front member (accuracy={c.accuracy}, macs={c.macs}, "
                f"encoding={c.encoding}) does not strictly dominate the "
                f"reference point ({acc_ref}, {mac_ref})")
    total = 0.0
    mac_prev = mac_ref
    seen = set()
    for c in sorted(members, key=lambda c: -c.accuracy):
        if c.objectives in seen:
            continue
        seen.add(c.objectives)
        total += (c.accuracy - acc_ref) * (mac_prev - c.macs)
        mac_prev = c.macs
    return total


def default_ref_point(space: SearchSpace) -> tuple[float, float]:
    """Accuracy floor 0 and 1% above the maximal config's MACs, so any
    real candidate dominates it."""
    biggest = cost.macs(space.dims, space.maximal_space_config()).macs
    return (0.0, 1.01 * biggest)


# ----------------------------------------------------------------------
# history and caching


@dataclass
class SearchHistory:
    algorithm: str
    ref_point: tuple[float, float]
    records: list = field(default_factory=list)

    def candidates(self) -> list[Candidate]:
        return [Candidate(tuple(r["encoding"]), r["accuracy"], r["macs"],
                          r["eval_index"]) for r in self.records]

    def front(self) -> list[Candidate]:
        return pareto_front(self.candidates())

    def hypervolume_trace(self) -> list[float]:
        return [r["hypervolume"] for r in self.records]

    def final_hypervolume(self) -> float:
        return self.records[-1]["hypervolume"] if self.records else 0.0

    def save_jsonl(self, path):
        with open(path, "w") as fh:
            header = {"kind": "search", "algorithm": self.algorithm,
                      "ref_point": list(self.ref_point)}
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    @classmethod
    def load_jsonl(cls, path):
        with open(path) as fh:
            header = json.loads(fh.readline())
            history = cls(header["algorithm"], tuple(header["ref_point"]))
            for line in fh:
                history.records.append(json.loads(line))
        return history


class _Recorder:
    """Evaluation cache that tags and logs each first-time evaluation."""

    def __init__(self, space, evaluator, history: SearchHistory,
                 track_hv: bool = True):
        self.space = space
        self.evaluator = evaluator
        self.history = history
        self.track_hv = track_hv
        self.cache: dict[tuple, Candidate] = {}

    def __contains__(self, enc):
        return self.space.canonicalize(enc) in self.cache

    @property
    def count(self):
        return len(self.cache)

    def evaluate(self, enc, iteration: int, source: str) -> Candidate:
        enc = self.space.canonicalize(enc)
        if enc in self.cache:
            return self.cache[enc]
        accuracy, macs = self.evaluator(self.space.decode(enc))
        cand = Candidate(enc, float(accuracy), int(macs), len(self.cache))
        self.cache[enc] = cand
        self.history.records.append({
            "kind": "evaluation", "eval_index": cand.eval_index,
            "iteration": iteration, "source": source,
            "encoding": list(enc), "accuracy": cand.accuracy,
            "macs": cand.macs, "hypervolume": self._front_hv(),
        })
        return cand

    def _front_hv(self):
        if not self.track_hv:
            return 0.0
        ref = self.history.ref_point
        inside = [c for c in self.cache.values()
                  if c.accuracy > ref[0] and c.macs < ref[1]]
        return hypervolume(inside, ref) if inside else 0.0


def _sample_unique(space, rng, recorder, attempts=RANDOM_RETRY_CAP):
    """A canonical encoding not yet evaluated, or None if the space is
    exhausted or the draw keeps colliding."""
    if recorder.count >= space.size():
        return None
    for _ in range(attempts):
        enc = space.encode(space.sample(rng))
        if enc not in recorder:
            return enc
    return None


# ----------------------------------------------------------------------
# random search


def random_search(space: SearchSpace, evaluator, budget: int, seed: int,
                  ref_point=None) -> SearchHistory:
    """Unique uniform samples until the budget (or the space) runs out."""
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    history = SearchHistory("random", ref_point or default_ref_point(space))
    recorder = _Recorder(space, evaluator, history)
    rng = np.random.default_rng(seed)
    budget = min(budget, space.size())
    if budget == space.size():
        for config in space.enumerate_configs():
            recorder.evaluate(space.encode(config), 0, "random")
        return history
    while recorder.count < budget:
        enc = _sample_unique(space, rng, recorder)
        if enc is None:
            break
        recorder.evaluate(enc, recorder.count, "random")
    return history


# ----------------------------------------------------------------------
# NSGA-II


def fast_nondominated_sort(candidates) -> list[list[int]]:
    """Indices grouped into fronts F0, F1, ...; stable within a front."""
    n = len(candidates)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    for i in range(n):
        for j in range(n):
            if i != j and dominates(candidates[i], candidates[j]):
                dominated_by[i].append(j)
        counts[i] = sum(1 for j in range(n)
                        if j != i and dominates(candidates[j], candidates[i]))
    fronts = [[i for i in range(n) if counts[i] == 0]]
    while fronts[-1]:
        nxt = []
        for i in fronts[-1]:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        fronts.append(sorted(nxt))
    return fronts[:-1]


def crowding_distance(candidates) -> np.ndarray:
    """Standard crowding distance; boundary points get infinity."""
    n = len(candidates)
    dist = np.zeros(n)
    if n == 0:
        return dist
    for values in (np.array([c.accuracy for c in candidates]),
                   np.array([float(c.macs) for c in candidates])):
        order = np.argsort(values, kind="stable")
        dist[order[0]] = dist[order[-1]] = np.inf
        span = values[order[-1]] - values[order[0]]
        if span <= 0 or n < 3:
            continue
        for k in range(1, n - 1):
            dist[order[k]] += (values[order[k + 1]] - values[order[k - 1]]) / span
    return dist


def _rank_and_crowding(candidates):
    rank = np.empty(len(candidates), dtype=int)
    crowd = np.empty(len(candidates))
    for r, front in enumerate(fast_nondominated_sort(candidates)):
        rank[front] = r
        crowd[front] = crowding_distance([candidates[i] for i in front])
    return rank, crowd


def _tournament(rng, rank, crowd):
    i, j = rng.integers(len(rank)), rng.integers(len(rank))
    if rank[i] != rank[j]:
        return i if rank[i] < rank[j] else j
    if crowd[i] != crowd[j]:
        return i if crowd[i] > crowd[j] else j
    return min(i, j)


def _environmental_selection(candidates, size):
    """Elitist truncation: whole fronts first, crowding on the boundary."""
    chosen = []
    for front in fast_nondominated_sort(candidates):
        if len(chosen) + len(front) <= size:
            chosen.extend(front)
            continue
        crowd = crowding_distance([candidates[i] for i in front])
        order = sorted(range(len(front)), key=lambda k: (-crowd[k], front[k]))
        chosen.extend(front[k] for k in order[:size - len(chosen)])
        break
    return [candidates[i] for i in chosen]


def _nsga2_engine(space, recorder, rng, population: int, generations: int,
                  p_m: float, iteration_offset: int = 0, source: str = "nsga2"):
    """Runs the evolution against `recorder`; returns nothing (the
    recorder's cache and history carry the results)."""
    parents = []
    seen = set()
    while len(parents) < population:
        enc = _sample_unique(space, rng, recorder)
        if enc is None or enc in seen:
            enc = space.encode(space.sample(rng))  # duplicates allowed late
        seen.add(enc)
        parents.append(recorder.evaluate(enc, iteration_offset, source))
    for gen in range(1, generations + 1):
        rank, crowd = _rank_and_crowding(parents)
        children = []
        while len(children) < population:
            pa = parents[_tournament(rng, rank, crowd)].encoding
            pb = parents[_tournament(rng, rank, crowd)].encoding
            ca, cb = space.crossover(pa, pb, rng)
            children.append(space.mutate(ca, rng, p_m))
            if len(children) < population:
                children.append(space.mutate(cb, rng, p_m))
        offspring = [recorder.evaluate(enc, iteration_offset + gen, source)
                     for enc in children]
        parents = _environmental_selection(parents + offspring, population)
    return parents


def default_mutation_rate(space: SearchSpace) -> float:
    """1 / free-gene count: 3 genes in uniform mode, the full encoding
    in per-layer mode."""
    genes = 3 if space.mode == "uniform" else space.encoding_length
    return 1.0 / genes


def nsga2(space: SearchSpace, evaluator, population: int = 12,
          generations: int = 10, p_m: float | None = None, seed: int = 0,
          ref_point=None) -> SearchHistory:
    """Elitist evolutionary search with non-dominated sorting."""
    if population < 2 or population % 2:
        raise ValueError(f"population must be even and >= 2, got {population}")
    if generations < 1:
        raise ValueError(f"generations must be >= 1, got {generations}")
    if p_m is None:
        p_m = default_mutation_rate(space)
    history = SearchHistory("nsga2", ref_point or default_ref_point(space))
    recorder = _Recorder(space, evaluator, history)
    rng = np.random.default_rng(seed)
    _nsga2_engine(space, recorder, rng, population, generations, p_m)
    return history


# ----------------------------------------------------------------------
# predictor-guided iterative search


class RidgeRegressor:
    """Closed-form ridge regression with a bias column."""

    def __init__(self, ridge: float = 1e-3):
        self.ridge = ridge
        self.coef = None

    def fit(self, X, y):
        X = np.column_stack([np.asarray(X, dtype=np.float64),
                             np.ones(len(X))])
        A = X.T @ X + self.ridge * np.eye(X.shape[1])
        self.coef = np.linalg.solve(A, X.T @ np.asarray(y, dtype=np.float64))
        return self

    def predict(self, X):
        X = np.column_stack([np.asarray(X, dtype=np.float64),
                             np.ones(len(X))])
        return X @ self.coef


def one_hot_features(space: SearchSpace, enc) -> np.ndarray:
    """Concatenated one-hot blocks over the informative encoding
    positions (the three free genes in uniform mode)."""
    enc = space.canonicalize(enc)
    blocks = []
    for pos in space.feature_positions():
        block = np.zeros(space.position_cardinality(pos))
        block[enc[pos]] = 1.0
        blocks.append(block)
    return np.concatenate(blocks)


def fit_predictors(space: SearchSpace, candidates, ridge: float = 1e-3):
    """One ridge model per objective, trained on evaluated candidates."""
    X = [one_hot_features(space, c.encoding) for c in candidates]
    acc_model = RidgeRegressor(ridge).fit(X, [c.accuracy for c in candidates])
    mac_model = RidgeRegressor(ridge).fit(X, [float(c.macs) for c in candidates])
    return acc_model, mac_model


def linas(space: SearchSpace, evaluator, budget: int, batch: int = 10,
          inner_population: int = 20, inner_generations: int = 20,
          ridge: float = 1e-3, seed: int = 0, ref_point=None) -> SearchHistory:
    """Iterative predictor-guided search.

    Each iteration evaluates a batch, refits one ridge predictor per
    objective on everything evaluated so far, runs an internal
    evolutionary search against the predicted objectives, and proposes
    the most crowding-diverse unevaluated members of the predicted
    front.  Shortfalls are filled with random unevaluated samples.
    """
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    if budget < batch:
        raise ValueError(f"budget {budget} must be >= batch ({batch})")
    history = SearchHistory("linas", ref_point or default_ref_point(space))
    recorder = _Recorder(space, evaluator, history)
    rng = np.random.default_rng(seed)
    space_size = space.size()
    p_m = default_mutation_rate(space)

    for _ in range(min(batch, budget, space_size)):
        enc = _sample_unique(space, rng, recorder)
        if enc is None:
            return history
        recorder.evaluate(enc, 0, "random")

    iteration = 1
    while recorder.count < min(budget, space_size):
        remaining = min(budget, space_size) - recorder.count
        want = min(batch, remaining)
        proposals = []
        if recorder.count >= 2:
            acc_model, mac_model = fit_predictors(
                space, list(recorder.cache.values()), ridge)

            def predicted(config):
                x = one_hot_features(space, space.encode(config))[None, :]
                return float(acc_model.predict(x)[0]), float(mac_model.predict(x)[0])

            inner_history = SearchHistory("linas-inner", (-np.inf, np.inf))
            inner = _Recorder(space, predicted, inner_history, track_hv=False)
            _nsga2_engine(space, inner, rng, inner_population,
                          inner_generations, p_m, source="inner")
            front = pareto_front(inner.cache.values())
            crowd = crowding_distance(front)
            order = sorted(range(len(front)), key=lambda k: (-crowd[k], k))
            for k in order:
                enc = front[k].encoding
                if enc not in recorder and enc not in proposals:
                    proposals.append(enc)
                if len(proposals) == want:
                    break
        for enc in proposals:
            recorder.evaluate(enc, iteration, "predicted")
        while recorder.count < min(budget, space_size) and len(proposals) < want:
            enc = _sample_unique(space, rng, recorder)
            if enc is None:
                return history
            proposals.append(enc)
            recorder.evaluate(enc, iteration, "fill")
        iteration += 1
    return history


# ----------------------------------------------------------------------
# evaluators


def make_subnet_evaluator(params, dataset, include_embeddings=False,
                          include_classifier=False):
    """True-objective evaluator: held-out accuracy and closed-form MACs
    of a config against frozen shared weights."""
    from .training import evaluate as eval_accuracy

    def evaluator(config):
        accuracy = eval_accuracy(params, config, dataset)
        report = cost.macs(params.dims, config, include_embeddings,
                           include_classifier)
        return accuracy, report.macs

    return evaluator
