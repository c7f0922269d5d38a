"""Multi-objective search: dominance/front/hypervolume against brute
oracles, then the three search algorithms on deterministic objectives."""

import numpy as np
import pytest

from elastictune import cost
from elastictune.search import (Candidate, RidgeRegressor, SearchHistory,
                                crowding_distance, default_mutation_rate,
                                default_ref_point, dominates,
                                fast_nondominated_sort, fit_predictors,
                                hypervolume, linas, make_subnet_evaluator,
                                nsga2, one_hot_features, pareto_front,
                                random_search)


def C(acc, mac, i=0):
    return Candidate((i,), acc, mac, i)


def _rand_candidates(rng, n):
    # quantized objectives so ties and duplicates actually occur
    return [C(round(float(rng.uniform(0, 1)), 2),
              int(rng.integers(1, 20)), i) for i, n_ in enumerate(range(n))]


def oracle_front(cands):
    return [c for c in cands
            if not any(dominates(d, c) for d in cands)]


# ----------------------------------------------------------- dominance


def test_dominates_definition():
    assert dominates(C(0.8, 10), C(0.7, 10))
    assert dominates(C(0.8, 9), C(0.8, 10))
    assert dominates(C(0.9, 5), C(0.7, 10))
    assert not dominates(C(0.8, 10), C(0.8, 10))  # irreflexive on ties
    assert not dominates(C(0.9, 12), C(0.8, 10))  # trade-off


def test_dominance_strict_partial_order():
    rng = np.random.default_rng(0)
    cands = _rand_candidates(rng, 60)
    for _ in range(400):
        a, b, c = (cands[i] for i in rng.integers(0, len(cands), 3))
        assert not (dominates(a, b) and dominates(b, a))  # antisymmetry
        if dominates(a, b) and dominates(b, c):
            assert dominates(a, c)  # transitivity


# --------------------------------------------------------- pareto front


def test_front_worked_example():
    cands = [C(0.8, 2, 0), C(0.6, 1, 1), C(0.5, 1.5, 2)]
    front = pareto_front(cands)
    assert {c.eval_index for c in front} == {0, 1}


def test_front_matches_quadratic_oracle():
    rng = np.random.default_rng(1)
    for trial in range(200):
        cands = _rand_candidates(rng, int(rng.integers(1, 40)))
        got = {id(c) for c in pareto_front(cands)}
        want = {id(c) for c in oracle_front(cands)}
        assert got == want, trial


def test_front_keeps_objective_ties():
    cands = [C(0.8, 2, 0), C(0.8, 2, 1), C(0.5, 3, 2)]
    front = pareto_front(cands)
    assert {c.eval_index for c in front} == {0, 1}


def test_front_single_and_empty():
    assert pareto_front([]) == []
    only = C(0.5, 5)
    assert pareto_front([only]) == [only]


def test_front_sorted_by_macs():
    rng = np.random.default_rng(2)
    cands = _rand_candidates(rng, 30)
    front = pareto_front(cands)
    assert all(front[i].macs <= front[i + 1].macs
               for i in range(len(front) - 1))


# --------------------------------------------------------- hypervolume


def test_hypervolume_worked_example():
    front = [C(0.8, 2, 0), C(0.6, 1, 1)]
    assert hypervolume(front, (0.0, 4.0)) == pytest.approx(2.2, abs=1e-12)


def test_hypervolume_monte_carlo():
    front = [C(0.8, 2, 0), C(0.6, 1, 1)]
    rng = np.random.default_rng(3)
    n = 2_000_000
    a = rng.uniform(0.0, 0.8, n)
    m = rng.uniform(0.0, 4.0, n)
    covered = np.zeros(n, dtype=bool)
    for c in front:
        covered |= (a <= c.accuracy) & (m >= c.macs)
    estimate = 0.8 * 4.0 * covered.mean()
    assert estimate == pytest.approx(2.2, abs=5e-3)


def test_hypervolume_ignores_dominated_members():
    front = [C(0.8, 2, 0), C(0.6, 1, 1)]
    noisy = front + [C(0.5, 3, 2), C(0.1, 3.9, 3)]
    assert hypervolume(noisy, (0.0, 4.0)) == hypervolume(front, (0.0, 4.0))


def test_hypervolume_duplicate_members_once():
    front = [C(0.8, 2, 0), C(0.8, 2, 1)]
    assert hypervolume(front, (0.0, 4.0)) == pytest.approx(0.8 * 2.0)


def test_hypervolume_error_names_offender():
    with pytest.raises(ValueError) as err:
        hypervolume([C(0.8, 5, 7)], (0.0, 4.0))  # macs beyond reference
    assert "macs=5" in str(err.value)
    assert "dominate" in str(err.value)
    with pytest.raises(ValueError):
        hypervolume([C(0.0, 2, 0)], (0.0, 4.0))  # ties the acc reference


def test_hypervolume_empty_front():
    assert hypervolume([], (0.0, 4.0)) == 0.0


def test_hypervolume_grows_with_new_nondominated_point():
    base = [C(0.8, 2, 0), C(0.6, 1, 1)]
    hv0 = hypervolume(base, (0.0, 4.0))
    hv1 = hypervolume(base + [C(0.9, 3, 2)], (0.0, 4.0))
    assert hv1 > hv0
    assert hv1 == pytest.approx(hv0 + 0.1 * (4.0 - 3.0), abs=1e-12)


# ------------------------------------------------- sorting and crowding


def test_nondominated_sort_layers():
    rng = np.random.default_rng(4)
    cands = _rand_candidates(rng, 40)
    fronts = fast_nondominated_sort(cands)
    flat = [i for front in fronts for i in front]
    assert sorted(flat) == list(range(len(cands)))  # exact partition
    # rank 0 is the oracle front
    assert {id(cands[i]) for i in fronts[0]} == \
        {id(c) for c in oracle_front(cands)}
    # each layer is the oracle front of what remains
    remaining = list(cands)
    for front in fronts:
        layer = {id(cands[i]) for i in front}
        assert layer == {id(c) for c in oracle_front(remaining)}
        remaining = [c for c in remaining if id(c) not in layer]


def test_crowding_boundaries_infinite():
    cands = [C(0.1, 10, 0), C(0.5, 5, 1), C(0.6, 4, 2), C(0.9, 1, 3)]
    d = crowding_distance(cands)
    assert np.isinf(d[0]) and np.isinf(d[3])
    assert np.isfinite(d[1]) and np.isfinite(d[2])


def test_crowding_interior_value():
    # three points, acc spans 0.8, macs spans 9: middle gets
    # (acc gap + macs gap) normalized by spans = (0.8/0.8) + (9/9) = 2
    cands = [C(0.1, 10, 0), C(0.5, 5, 1), C(0.9, 1, 2)]
    d = crowding_distance(cands)
    assert d[1] == pytest.approx(2.0)


def test_crowding_degenerate_sets():
    assert crowding_distance([]).size == 0
    assert np.isinf(crowding_distance([C(0.5, 5)])).all()
    d = crowding_distance([C(0.5, 5, 0), C(0.5, 5, 1)])
    assert np.isinf(d).all()


# -------------------------------------------------------- random search


def _proxy_evaluator(space):
    """Deterministic toy objectives: accuracy grows with every gene."""
    nd = len(space.depth_values) - 1 or 1
    nh = len(space.head_values) - 1 or 1
    nf = len(space.ffn_values) - 1 or 1

    def evaluator(config):
        enc = space.encode(config)
        L = space.dims.L_max
        acc = (0.4 * enc[0] / nd + 0.35 * enc[1] / nh
               + 0.25 * enc[1 + L] / nf)
        return 0.2 + 0.6 * acc, cost.macs(space.dims, config).macs

    return evaluator


def _exhaustive_front(space, evaluator):
    cands = []
    for i, cfg in enumerate(space.enumerate_configs()):
        acc, macs = evaluator(cfg)
        cands.append(Candidate(space.encode(cfg), acc, int(macs), i))
    return pareto_front(cands)


def _front_objectives(front):
    return sorted((c.accuracy, c.macs) for c in front)


def test_random_search_exhausts_space(desk_space):
    ev = _proxy_evaluator(desk_space)
    history = random_search(desk_space, ev, budget=18, seed=0)
    assert len(history.records) == 18
    encodings = {tuple(r["encoding"]) for r in history.records}
    assert len(encodings) == 18
    assert _front_objectives(history.front()) == \
        _front_objectives(_exhaustive_front(desk_space, ev))


def test_random_search_budget_capped_by_space(desk_space):
    history = random_search(desk_space, _proxy_evaluator(desk_space),
                            budget=500, seed=0)
    assert len(history.records) == desk_space.size()


def test_random_search_unique_and_deterministic(desk_space):
    ev = _proxy_evaluator(desk_space)
    h1 = random_search(desk_space, ev, budget=10, seed=5)
    h2 = random_search(desk_space, ev, budget=10, seed=5)
    assert h1.records == h2.records
    encs = [tuple(r["encoding"]) for r in h1.records]
    assert len(set(encs)) == len(encs) == 10
    h3 = random_search(desk_space, ev, budget=10, seed=6)
    assert [tuple(r["encoding"]) for r in h3.records] != encs


def test_random_search_validates_budget(desk_space):
    with pytest.raises(ValueError):
        random_search(desk_space, _proxy_evaluator(desk_space), budget=0,
                      seed=0)


def test_hypervolume_trace_nondecreasing(desk_space):
    ev = _proxy_evaluator(desk_space)
    for history in (random_search(desk_space, ev, budget=18, seed=0),
                    nsga2(desk_space, ev, population=6, generations=5, seed=1),
                    linas(desk_space, ev, budget=16, batch=6, seed=2)):
        trace = history.hypervolume_trace()
        assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:])), \
            history.algorithm
        assert history.final_hypervolume() == trace[-1]


# --------------------------------------------------------------- NSGA-II


def test_nsga2_finds_exhaustive_front(desk_space):
    ev = _proxy_evaluator(desk_space)
    history = nsga2(desk_space, ev, population=12, generations=10, seed=0)
    assert _front_objectives(history.front()) == \
        _front_objectives(_exhaustive_front(desk_space, ev))


def test_nsga2_no_double_evaluation(desk_space):
    calls = {"n": 0}
    base = _proxy_evaluator(desk_space)

    def counting(config):
        calls["n"] += 1
        return base(config)

    history = nsga2(desk_space, counting, population=8, generations=12,
                    seed=3)
    assert calls["n"] == len(history.records)
    encs = [tuple(r["encoding"]) for r in history.records]
    assert len(set(encs)) == len(encs)
    assert calls["n"] <= desk_space.size()


def test_nsga2_deterministic(desk_space):
    ev = _proxy_evaluator(desk_space)
    h1 = nsga2(desk_space, ev, population=6, generations=4, seed=9)
    h2 = nsga2(desk_space, ev, population=6, generations=4, seed=9)
    assert h1.records == h2.records


def test_nsga2_validation(desk_space):
    ev = _proxy_evaluator(desk_space)
    with pytest.raises(ValueError, match="population"):
        nsga2(desk_space, ev, population=7)
    with pytest.raises(ValueError, match="generations"):
        nsga2(desk_space, ev, generations=0)


def test_default_mutation_rate(desk_space, micro_space_per_layer):
    assert default_mutation_rate(desk_space) == pytest.approx(1 / 3)
    assert default_mutation_rate(micro_space_per_layer) == pytest.approx(
        1 / micro_space_per_layer.encoding_length)


def test_nsga2_records_tag_generations(desk_space):
    history = nsga2(desk_space, _proxy_evaluator(desk_space), population=6,
                    generations=3, seed=4)
    iters = {r["iteration"] for r in history.records}
    assert 0 in iters  # initial population
    assert max(iters) <= 3
    assert all(r["source"] == "nsga2" for r in history.records)


# ------------------------------------------------------------ predictors


def test_ridge_recovers_linear_map():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((60, 7))
    w = rng.standard_normal(7)
    y = X @ w + 2.5
    model = RidgeRegressor(1e-8).fit(X, y)
    np.testing.assert_allclose(model.predict(X), y, rtol=1e-6, atol=1e-8)


def test_one_hot_features_shape_and_blocks(desk_space):
    enc = desk_space.encode(desk_space.minimal_config())
    x = one_hot_features(desk_space, enc)
    cards = [desk_space.position_cardinality(p)
             for p in desk_space.feature_positions()]
    assert x.shape == (sum(cards),)
    assert x.sum() == len(cards)  # exactly one hot entry per block
    offset = 0
    for card in cards:
        assert x[offset:offset + card].sum() == 1.0
        offset += card


def _linear_evaluator(space):
    """Both objectives exactly linear in the one-hot features, tie-free,
    and deliberately conflicting: accuracy loads on the cheap ffn gene
    while cost loads on depth, so a genuine trade-off front exists."""
    L = space.dims.L_max

    def evaluator(config):
        enc = space.encode(config)
        acc = 0.2 + 0.017 * enc[0] + 0.031 * enc[1] + 0.11 * enc[1 + L]
        macs = 1000 + 1700 * enc[0] + 500 * enc[1] + 130 * enc[1 + L]
        return acc, macs

    return evaluator


def test_fit_predictors_interpolate_linear_objectives(desk_space):
    ev = _linear_evaluator(desk_space)
    cands = []
    for i, cfg in enumerate(desk_space.enumerate_configs()):
        acc, macs = ev(cfg)
        cands.append(Candidate(desk_space.encode(cfg), acc, int(macs), i))
    acc_model, mac_model = fit_predictors(desk_space, cands, ridge=1e-6)
    X = np.array([one_hot_features(desk_space, c.encoding) for c in cands])
    np.testing.assert_allclose(acc_model.predict(X),
                               [c.accuracy for c in cands], atol=1e-4)
    np.testing.assert_allclose(mac_model.predict(X),
                               [float(c.macs) for c in cands], rtol=1e-4)


# ----------------------------------------------------------------- LINAS


def test_linas_degenerates_to_random_at_single_batch(desk_space):
    ev = _proxy_evaluator(desk_space)
    h_lin = linas(desk_space, ev, budget=10, batch=10, seed=7)
    h_rnd = random_search(desk_space, ev, budget=10, seed=7)
    assert [tuple(r["encoding"]) for r in h_lin.records] == \
        [tuple(r["encoding"]) for r in h_rnd.records]
    assert all(r["source"] == "random" for r in h_lin.records)
    assert _front_objectives(h_lin.front()) == _front_objectives(h_rnd.front())


def test_linas_self_consistent_linear_objective(desk_space):
    # evaluator shares the predictor's functional form, so once fitted
    # the predicted front is the true front and proposals stay on it
    ev = _linear_evaluator(desk_space)
    true_front = {tuple(c.encoding)
                  for c in _exhaustive_front(desk_space, ev)}
    history = linas(desk_space, ev, budget=17, batch=5, seed=0)
    predicted = [r for r in history.records
                 if r["source"] == "predicted" and r["iteration"] >= 2]
    assert predicted, "expected predictor-guided proposals after iteration 2"
    for r in predicted:
        assert tuple(r["encoding"]) in true_front, r
    assert {tuple(c.encoding) for c in history.front()} == true_front


def test_linas_exhausts_small_space(desk_space):
    ev = _proxy_evaluator(desk_space)
    history = linas(desk_space, ev, budget=40, batch=6, seed=1)
    assert len(history.records) == desk_space.size()
    assert _front_objectives(history.front()) == \
        _front_objectives(_exhaustive_front(desk_space, ev))


def test_linas_budget_respected_exactly(desk_space):
    history = linas(desk_space, _proxy_evaluator(desk_space), budget=14,
                    batch=5, seed=2)
    assert len(history.records) == 14
    encs = [tuple(r["encoding"]) for r in history.records]
    assert len(set(encs)) == 14


def test_linas_single_point_batches_fall_back_to_random(desk_space):
    # with batch=1 the first iteration has a 1-point training set, below
    # the 2-point predictor minimum: that iteration must fill randomly
    history = linas(desk_space, _proxy_evaluator(desk_space), budget=3,
                    batch=1, seed=3)
    assert history.records[0]["source"] == "random"
    assert history.records[1]["source"] == "fill"
    assert history.records[2]["source"] in ("predicted", "fill")


def test_linas_validation(desk_space):
    ev = _proxy_evaluator(desk_space)
    with pytest.raises(ValueError, match="batch"):
        linas(desk_space, ev, budget=10, batch=0)
    with pytest.raises(ValueError, match="budget"):
        linas(desk_space, ev, budget=5, batch=10)


def test_linas_deterministic(desk_space):
    ev = _proxy_evaluator(desk_space)
    h1 = linas(desk_space, ev, budget=14, batch=6, seed=11)
    h2 = linas(desk_space, ev, budget=14, batch=6, seed=11)
    assert h1.records == h2.records


# ----------------------------------------------------- history plumbing


def test_history_jsonl_round_trip(tmp_path, desk_space):
    history = random_search(desk_space, _proxy_evaluator(desk_space),
                            budget=8, seed=0)
    path = tmp_path / "hist.jsonl"
    history.save_jsonl(path)
    loaded = SearchHistory.load_jsonl(path)
    assert loaded.algorithm == history.algorithm
    assert tuple(loaded.ref_point) == tuple(history.ref_point)
    assert loaded.records == history.records
    assert _front_objectives(loaded.front()) == \
        _front_objectives(history.front())


def test_default_ref_point(desk_space):
    acc_ref, mac_ref = default_ref_point(desk_space)
    assert acc_ref == 0.0
    biggest = cost.macs(desk_space.dims,
                        desk_space.maximal_space_config()).macs
    assert mac_ref == pytest.approx(1.01 * biggest)


def test_make_subnet_evaluator_matches_components(desk_dims, desk_space):
    from elastictune.data import make_dataset
    from elastictune.model import init_supernet
    from elastictune.training import evaluate

    params = init_supernet(desk_dims, seed=0)
    ds = make_dataset(64, desk_dims.N, desk_dims.V, seed=1)
    evaluator = make_subnet_evaluator(params, ds)
    cfg = desk_space.minimal_config()
    acc, macs = evaluator(cfg)
    assert acc == evaluate(params, cfg, ds)
    assert macs == cost.macs(desk_dims, cfg).macs
