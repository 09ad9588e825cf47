import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_panel
from fundbasket.exceptions import DataError
from fundbasket.stats import (describe, markdown_table, presence_markdown, presence_stats, summary_stats,
                              turnover_markdown, turnover_stats, turnover_table)
from oracles import describe as _describe_oracle, holds, repeat_items


def _close(a, b):
    assert set(a) == set(b)
    for k in a:
        assert a[k] == pytest.approx(b[k], rel=1e-12, abs=1e-12)


@given(st.lists(st.floats(0, 1e4, allow_nan=False), min_size=1, max_size=50))
def test_describe_matches_oracle(xs):
    _close(describe(xs), _describe_oracle(xs))


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_summary_stats_oracle(seed):
    p = random_panel(np.random.default_rng(seed), n_funds=12, n_items=15)
    q = p.quarters[-1]
    W = p.weights(q).toarray()
    funds = [u for u in range(p.n_funds) if W[u].sum() > 0]
    stats = summary_stats(p, q)
    assert stats.n_funds == len(funds)
    _close(stats.size, _describe_oracle([len(holds(p, u, q)) for u in funds]))
    _close(stats.mean_alloc_pct, _describe_oracle([100 * W[u].sum() / len(holds(p, u, q)) for u in funds]))


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_turnover_stats_oracle(seed):
    p = random_panel(np.random.default_rng(seed), n_funds=12, n_items=15)
    q = p.quarters[3]
    expected = {}
    for u in range(p.n_funds):
        now, before = holds(p, u, q), holds(p, u, q - 1)
        if now and before:
            expected[p.vocab.fund_ids[u]] = 100 * len(now - before) / len(now)
    got = turnover_stats(p, q)
    assert got.per_fund.to_dict() == pytest.approx(expected)
    _close(got.summary, _describe_oracle(list(expected.values())))


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_presence_stats_oracle(seed):
    p = random_panel(np.random.default_rng(seed), n_funds=12, n_items=15)
    q = p.quarters[-1]
    funds = [u for u in range(p.n_funds) if holds(p, u, q)]
    overall, explore = presence_stats(p, q)
    for i in range(p.n_items):
        held = sum(i in holds(p, u, q) for u in funds)
        new = sum(i in holds(p, u, q) and i not in repeat_items(p, u, q) for u in funds)
        o = overall[overall["item"] == p.vocab.item_ids[i]].iloc[0]
        e = explore[explore["item"] == p.vocab.item_ids[i]].iloc[0]
        assert o["funds"] == held and o["pct"] == pytest.approx(100 * held / len(funds))
        assert e["funds"] == new and e["pct"] == pytest.approx(100 * new / len(funds))
    assert list(overall["pct"]) == sorted(overall["pct"], reverse=True)


def test_turnover_needs_previous_quarter(small_panel):
    with pytest.raises(DataError):
        turnover_stats(small_panel, small_panel.quarters[0])


def test_markdown_renderers(small_panel):
    q = small_panel.quarters[-1]
    text = summary_stats(small_panel, q).to_markdown()
    assert "| Portfolio Size |" in text and "| % Mean Alloc. |" in text
    table = turnover_table(small_panel, small_panel.quarters[1:])
    assert list(table.index) == ["mean", "std", "min", "25%", "50%", "75%", "max"]
    assert "%" in turnover_markdown(table)
    overall, explore = presence_stats(small_panel, q)
    md = presence_markdown(overall, explore, q, top=3)
    assert md.count("\n| ") == 5 and "Top Explore" in md


def test_markdown_table():
    assert markdown_table(["a", "b"], [[1, 2]]) == "| a | b |\n| :--- | ---: |\n| 1 | 2 |\n"
