import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_panel
from fundbasket.dataset import explore_mask, temporal_split
from fundbasket.eval.harness import (ALL_TASKS, EvalOutcome, TaskKind, bootstrap_ci, evaluate, metric_key,
                                     paired_difference_ci, significantly_different, task_filter)
from fundbasket.exceptions import ConfigError, ModelError
from fundbasket.models import EASE, LastAllocation, RandomScorer
from oracles import holds, ndcg, recall, repeat_items


def test_task_parse():
    assert TaskKind.parse("nnbr") is TaskKind.NNBR
    assert TaskKind.parse(TaskKind.NBR) is TaskKind.NBR
    with pytest.raises(ValueError):
        TaskKind.parse("xyz")
    assert metric_key("nbrr", "ndcg", 10) == "NBRR/ndcg@10"


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_task_partition(seed):
    p = random_panel(np.random.default_rng(seed), n_quarters=6)
    target = p.quarters[-1]
    mask = explore_mask(p, target)
    funds = np.flatnonzero(p.present(target))
    targets = [holds(p, u, target) for u in funds]
    scores = np.zeros((len(funds), p.n_items))
    nbr, _ = task_filter(targets, scores, mask, "nbr", funds)
    nnbr, c_new = task_filter(targets, scores, mask, "nnbr", funds)
    nbrr, c_rep = task_filter(targets, scores, mask, "nbrr", funds)
    for row, u in enumerate(funds):
        assert nnbr[row].isdisjoint(nbrr[row])
        assert nnbr[row] | nbrr[row] == nbr[row]
        assert nbrr[row] == nbr[row] & repeat_items(p, u, target)
        assert not (c_new[row] & c_rep[row]).any() and (c_new[row] | c_rep[row]).all()


def test_task_filter_requires_mask():
    with pytest.raises(ValueError):
        task_filter([{0}], np.zeros((1, 3)), None, "nnbr")


def _fitted(panel, model):
    split = temporal_split(panel, history_length=4)
    return split, model.fit(panel.restrict(split.history))


def test_evaluate_matches_manual_computation(small_panel):
    split, model = _fitted(small_panel, RandomScorer(seed=7))
    target = split.valid_target
    out = evaluate(model, small_panel, split, target, ks=(3, 5))
    funds = np.flatnonzero(small_panel.present(target))
    assert out.fund_ids == [small_panel.vocab.fund_ids[u] for u in funds]
    scores = model.decision_function(funds)
    for row, u in enumerate(funds):
        T = holds(small_panel, u, target)
        order = sorted(range(small_panel.n_items), key=lambda i: (-scores[row, i], i))
        assert out.values["NBR/recall@5"][row] == pytest.approx(recall(order, T, 5))
        assert out.values["NBR/ndcg@3"][row] == pytest.approx(ndcg(order, T, 3))
        rep = repeat_items(small_panel, u, target)
        novel_T = T - rep
        novel_order = [i for i in order if i not in rep]
        got = out.values["NNBR/recall@5"][row]
        if novel_T:
            assert got == pytest.approx(recall(novel_order, novel_T, 5))
        else:
            assert np.isnan(got)


def test_empty_target_modes(small_panel):
    split, model = _fitted(small_panel, LastAllocation())
    skip = evaluate(model, small_panel, split, split.valid_target, tasks=["nnbr"])
    zero = evaluate(model, small_panel, split, split.valid_target, tasks=["nnbr"], empty_target="zero")
    key = "NNBR/recall@20"
    abstain = np.isnan(skip.values[key])
    assert np.all(zero.values[key][abstain] == 0)
    assert not np.isnan(zero.values[key]).any()
    assert skip.population("nnbr") == int((~abstain).sum())


def test_evaluate_guards(small_panel):
    split = temporal_split(small_panel, history_length=4)
    with pytest.raises(ModelError):
        evaluate(EASE(), small_panel, split, split.valid_target)
    leaky = LastAllocation().fit(small_panel.restrict(small_panel.quarters[:5]))
    with pytest.raises(ModelError):
        evaluate(leaky, small_panel, split, split.valid_target)
    ok = LastAllocation().fit(small_panel.restrict(split.history))
    with pytest.raises(ConfigError):
        evaluate(ok, small_panel, split, split.valid_target, ks=(0,))
    with pytest.raises(ConfigError):
        evaluate(ok, small_panel, split, split.valid_target, empty_target="drop")


def test_outcome_round_trip(small_panel):
    split, model = _fitted(small_panel, LastAllocation())
    out = evaluate(model, small_panel, split, split.test_target, label="test", name="last_alloc")
    back = EvalOutcome.from_dict(out.to_dict())
    assert back.fund_ids == out.fund_ids and back.label == "test" and back.target == out.target
    for key in out.values:
        np.testing.assert_array_equal(back.values[key], out.values[key])
    assert set(out.values) == {metric_key(t, m, k) for t in ALL_TASKS for m in ("recall", "ndcg") for k in (10, 20)}


def test_bootstrap_constant_and_small():
    assert bootstrap_ci([0.3] * 20) == (0.3, 0.3)
    assert bootstrap_ci([1.0]) is None
    assert bootstrap_ci([np.nan, 1.0]) is None


def test_bootstrap_is_seeded():
    x = np.random.default_rng(0).random(50)
    assert bootstrap_ci(x, seed=4) == bootstrap_ci(x, seed=4)
    lo, hi = bootstrap_ci(x)
    assert lo < x.mean() < hi


def test_bootstrap_coverage():
    rng = np.random.default_rng(2024)
    hits = 0
    trials = 200
    for t in range(trials):
        x = rng.normal(0.5, 1.0, size=60)
        lo, hi = bootstrap_ci(x, resamples=500, seed=t)
        hits += lo <= 0.5 <= hi
    assert 0.88 <= hits / trials <= 0.99


def test_paired_difference():
    a = np.linspace(0, 1, 40)
    assert significantly_different(a + 0.2, a)
    assert not significantly_different(a, a)
    noisy = a + np.random.default_rng(1).normal(0, 0.2, 40)
    lo, hi = paired_difference_ci(noisy, a)
    assert lo < 0 < hi
