import json

import numpy as np
import pandas as pd
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from conftest import random_panel
from fundbasket.dataset import (Basket, PanelDataset, SplitSpec, Vocab, build_panel, explore_mask,
                                export_atomic, interaction_matrix, load_panel, read_inter, save_panel,
                                temporal_split)
from fundbasket.exceptions import DataError
from fundbasket.quarters import to_quarter
from oracles import holds, repeat_items


def _vocab(n_funds=2, n_items=3):
    return Vocab(tuple(f"F{u}" for u in range(n_funds)), tuple(f"I{i}" for i in range(n_items)))


def test_vocab_rejects_duplicates():
    with pytest.raises(DataError):
        Vocab(("A", "A"), ("x",))
    with pytest.raises(DataError):
        Vocab(("A",), ("x", "y"), item_labels=("X",))


def test_vocab_round_trip():
    v = Vocab(("A", "B"), ("x", "y"), ("X", None))
    assert Vocab.from_dict(v.to_dict()) == v
    assert v.fund_index("B") == 1 and v.item_index("y") == 1
    assert v.label(0) == "X" and v.label(1) == "y"


def test_basket_validation():
    q = to_quarter("2021Q1")
    with pytest.raises(DataError):
        Basket(0, q, frozenset({1}), {1: 0.0})
    with pytest.raises(DataError):
        Basket(0, q, frozenset({1, 2}), {1: 0.7, 2: 0.7})
    with pytest.raises(DataError):
        Basket(0, q, frozenset({1}), {2: 0.5})


def test_panel_validation():
    v = _vocab()
    with pytest.raises(DataError):
        PanelDataset(v, ["2021Q2", "2021Q1"], {})
    with pytest.raises(DataError):
        PanelDataset(v, ["2021Q1"], {"2021Q1": sp.csr_matrix(np.ones((2, 2)) * 0.1)})
    with pytest.raises(DataError):
        PanelDataset(v, ["2021Q1"], {"2021Q1": sp.csr_matrix(np.array([[0.6, 0.6, 0], [0, 0, 0]]))})
    with pytest.raises(DataError):
        PanelDataset(v, ["2021Q1"], {"2021Q1": sp.csr_matrix(np.array([[-0.1, 0, 0], [0, 0, 0]]))})
    with pytest.raises(DataError):
        PanelDataset(v, ["2021Q1"], {"2021Q2": sp.csr_matrix((2, 3))})


def test_panel_accessors(small_panel):
    p = small_panel
    q = p.quarters[2]
    W = p.weights(q).toarray()
    for u in range(p.n_funds):
        b = p.basket(u, q)
        if W[u].sum() == 0:
            assert b is None and not p.present(q)[u]
        else:
            assert b.items == frozenset(np.flatnonzero(W[u]).tolist())
            assert b.weights[int(np.flatnonzero(W[u])[0])] == pytest.approx(W[u][np.flatnonzero(W[u])[0]])
    assert p.n_baskets() == sum(1 for _ in p.iter_baskets())
    assert sorted(np.unique(p.incidence(q).data)) in ([1.0], [])


def test_weights_returns_copy(small_panel):
    q = small_panel.quarters[0]
    w = small_panel.weights(q)
    w.data[:] = 0
    assert small_panel.weights(q).sum() > 0


def test_from_baskets_round_trip(small_panel):
    rebuilt = PanelDataset.from_baskets(small_panel.vocab, small_panel.quarters, small_panel.iter_baskets())
    assert rebuilt == small_panel
    assert rebuilt.fingerprint() == small_panel.fingerprint()


def test_fingerprint_changes_on_mutation(small_panel):
    q = small_panel.quarters[-1]
    W = small_panel.weights(q).tolil()
    W[0, 0] = 0.001 if W[0, 0] == 0 else 0
    changed = small_panel.replace_quarter(q, W)
    assert changed.fingerprint() != small_panel.fingerprint()
    assert changed != small_panel


def test_restrict_keeps_vocab(small_panel):
    sub = small_panel.restrict(small_panel.quarters[:3])
    assert sub.vocab == small_panel.vocab
    assert sub.quarters == small_panel.quarters[:3]
    with pytest.raises(DataError):
        sub.weights(small_panel.quarters[4])


def test_interaction_matrix_is_or(small_panel):
    qs = small_panel.quarters[:3]
    X = interaction_matrix(small_panel, qs).toarray()
    for u in range(small_panel.n_funds):
        expected = set().union(*(holds(small_panel, u, q) for q in qs))
        assert set(np.flatnonzero(X[u]).tolist()) == expected


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_explore_mask_matches_scan(seed, window):
    p = random_panel(np.random.default_rng(seed), n_quarters=7)
    target = p.quarters[-1]
    mask = explore_mask(p, target, window)
    E = mask.toarray()
    for u in range(p.n_funds):
        rep = repeat_items(p, u, target, window)
        for i in range(p.n_items):
            assert E[u, i] == (0 if i in rep else 1)
        assert set(np.flatnonzero(mask.novel_row(u)).tolist()) == set(range(p.n_items)) - rep


def test_explore_mask_calendar_window():
    v = _vocab(1, 3)
    mats = {"2020Q1": sp.csr_matrix([[0.5, 0, 0]]), "2021Q1": sp.csr_matrix([[0, 0.5, 0]])}
    p = PanelDataset(v, ["2020Q1", "2021Q1", "2021Q2"], mats)
    # 2020Q1 is five quarters before 2021Q2, outside a 4-quarter window
    assert mask_items(p, "2021Q2", 4) == {1}
    assert mask_items(p, "2021Q2", 5) == {0, 1}


def mask_items(p, target, window):
    return set(np.flatnonzero(explore_mask(p, target, window).repeat_row(0)).tolist())


def test_explore_mask_errors(small_panel):
    with pytest.raises(DataError):
        explore_mask(small_panel, small_panel.quarters[0])
    with pytest.raises(DataError):
        explore_mask(small_panel, small_panel.quarters[2], 0)


def test_split_invariants():
    s = SplitSpec(("2020Q1", "2020Q2"), "2020Q2", "2020Q3", "2020Q4")
    assert s.targets == {"valid": to_quarter("2020Q3"), "test": to_quarter("2020Q4")}
    assert SplitSpec.from_dict(s.to_dict()) == s
    with pytest.raises(DataError):
        SplitSpec(("2020Q1", "2020Q3"), "2020Q2", "2020Q3", "2020Q4")
    with pytest.raises(DataError):
        SplitSpec(("2020Q1",), "2020Q1", "2020Q3", "2020Q3")
    with pytest.raises(DataError):
        SplitSpec((), "2020Q1", "2020Q3", "2020Q4")


def test_temporal_split(small_panel):
    s = temporal_split(small_panel, history_length=4)
    assert s.history == small_panel.quarters[:4]
    assert s.valid_target == small_panel.quarters[4] and s.test_target == small_panel.quarters[5]
    with pytest.raises(DataError):
        temporal_split(small_panel, history_length=5)


def _holdings():
    rows = []
    for q in ("2021Q1", "2021Q2"):
        rows += [{"fund_id": "A", "cusip": "X", "quarter": q, "value_usd": 30.0},
                 {"fund_id": "A", "cusip": "Y", "quarter": q, "value_usd": 70.0},
                 {"fund_id": "B", "cusip": "X", "quarter": q, "value_usd": 10.0}]
    rows.append({"fund_id": "C", "cusip": "Z", "quarter": "2021Q2", "value_usd": 5.0})
    rows.append({"fund_id": "A", "cusip": "Y", "quarter": "2021Q2", "value_usd": 0.0})
    return pd.DataFrame(rows)


def test_build_panel_normalizes_and_filters():
    p = build_panel(_holdings(), min_history=2)
    assert p.vocab.fund_ids == ("A", "B")
    assert "Z" not in p.vocab.item_ids
    W = p.weights("2021Q1").toarray()
    a, x, y = p.vocab.fund_index("A"), p.vocab.item_index("X"), p.vocab.item_index("Y")
    assert W[a, x] == pytest.approx(0.3) and W[a, y] == pytest.approx(0.7)
    assert W[p.vocab.fund_index("B"), x] == pytest.approx(1.0)


def test_build_panel_uses_weight_column_and_aggregates():
    df = pd.DataFrame([
        {"fund_id": "A", "cusip": "X", "quarter": "2021Q1", "value_usd": 10.0, "weight": 0.1},
        {"fund_id": "A", "cusip": "X", "quarter": "2021Q1", "value_usd": 10.0, "weight": 0.15},
        {"fund_id": "A", "cusip": "Y", "quarter": "2021Q2", "value_usd": 10.0, "weight": 0.2},
    ])
    p = build_panel(df, min_history=1)
    assert p.weights("2021Q1").toarray()[0, p.vocab.item_index("X")] == pytest.approx(0.25)


def test_build_panel_errors():
    with pytest.raises(DataError):
        build_panel(pd.DataFrame())
    with pytest.raises(DataError):
        build_panel(pd.DataFrame([{"fund_id": "A", "quarter": "2021Q1", "value_usd": 1.0}]))
    with pytest.raises(DataError):
        build_panel(_holdings(), min_history=3)


def test_build_panel_window_keeps_empty_quarters():
    p = build_panel(_holdings(), min_history=1, window=["2020Q4", "2021Q1", "2021Q2"])
    assert [str(q) for q in p.quarters] == ["2020Q4", "2021Q1", "2021Q2"]
    assert p.weights("2020Q4").nnz == 0


def test_atomic_export_round_trip(tmp_path, small_panel):
    split = temporal_split(small_panel, history_length=4)
    paths = export_atomic(small_panel, split, tmp_path)
    header = paths["train"].read_text().splitlines()[0]
    assert header == "user_id:token\titem_id:token\ttimestamp:float\trating:float"
    back = read_inter([paths["train"], paths["valid"], paths["test"]], small_panel.vocab)
    for q in small_panel.quarters:
        if small_panel.weights(q).nnz:
            assert (back.weights(q) != small_panel.weights(q)).nnz == 0


def test_atomic_export_is_deterministic(tmp_path, small_panel):
    split = temporal_split(small_panel, history_length=4)
    a = export_atomic(small_panel, split, tmp_path / "a")
    b = export_atomic(small_panel, split, tmp_path / "b")
    for part in a:
        assert a[part].read_bytes() == b[part].read_bytes()


def test_save_load_panel(tmp_path, small_panel):
    save_panel(small_panel, tmp_path, provenance={"source": "test"})
    loaded = load_panel(tmp_path)
    assert loaded == small_panel and loaded.fingerprint() == small_panel.fingerprint()
    meta = json.loads((tmp_path / "panel.json").read_text())
    meta["fingerprint"] = "0" * 64
    (tmp_path / "panel.json").write_text(json.dumps(meta))
    with pytest.raises(DataError):
        load_panel(tmp_path)
    with pytest.raises(DataError):
        load_panel(tmp_path / "missing")
