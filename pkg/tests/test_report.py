import json

import numpy as np

from fundbasket.eval.harness import EvalOutcome, TaskKind
from fundbasket.eval.report import comparison_rows, load_outcomes, mark_column, write_report
from fundbasket.quarters import to_quarter

KEY = "NNBR/recall@20"


def _outcome(model, values, label="valid", target="2021Q2"):
    values = np.asarray(values, dtype=float)
    keys = [f"NNBR/{m}@20" for m in ("recall", "ndcg")]
    return EvalOutcome(model, to_quarter(target), [f"F{i}" for i in range(len(values))],
                       {k: values.copy() for k in keys}, (TaskKind.NNBR,), (20,), label=label)


def _spread(center, n=80, seed=0):
    return np.clip(center + np.random.default_rng(seed).normal(0, 0.02, n), 0, 1)


def test_clear_ordering_marks_best_and_runner_up():
    outs = [_outcome("pop", _spread(0.3)), _outcome("ease", _spread(0.6, seed=1)), _outcome("random", _spread(0.1, seed=2))]
    assert mark_column(outs, KEY) == {1: "best", 0: "runner_up"}


def test_tied_models_are_not_marked():
    same = _spread(0.4)
    assert mark_column([_outcome("a", same), _outcome("b", same)], KEY) == {}


def test_runner_up_needs_its_own_margin():
    base = _spread(0.3)
    outs = [_outcome("a", base + 0.3), _outcome("b", base), _outcome("c", base)]
    assert mark_column(outs, KEY) == {0: "best"}


def test_two_models_underline_follows_bold():
    outs = [_outcome("a", _spread(0.2)), _outcome("b", _spread(0.7, seed=3))]
    assert mark_column(outs, KEY) == {1: "best", 0: "runner_up"}


def test_abstentions_are_ignored():
    a = _spread(0.5)
    b = a.copy()
    b[:40] = np.nan
    assert _outcome("b", b).mean(KEY) == np.nanmean(b)
    assert mark_column([_outcome("a", a), _outcome("b", b)], KEY) == {}


def test_rows_and_markup():
    outs = [_outcome("ease", _spread(0.6)), _outcome("pop", _spread(0.3, seed=1)),
            _outcome("ease", _spread(0.5), "test", "2021Q3"), _outcome("pop", _spread(0.5), "test", "2021Q3")]
    header, rows = comparison_rows(outs)
    assert header == ["Model", "NNBR recall@20 2021Q2", "NNBR recall@20 2021Q3",
                      "NNBR ndcg@20 2021Q2", "NNBR ndcg@20 2021Q3"]
    assert rows[0][0] == "EASE" and rows[0][1].startswith("**") and rows[1][1].startswith("<u>")
    assert rows[0][2] == f"{np.mean(_spread(0.5)):.3f}"


def test_write_and_merge(tmp_path):
    outs = [_outcome("ease", _spread(0.6)), _outcome("pop", _spread(0.3, seed=1))]
    write_report(outs, tmp_path / "one", {"seed": 0})
    write_report(outs[:1], tmp_path / "a")
    write_report(outs[1:], tmp_path / "b")
    merged, _ = load_outcomes([tmp_path / "a" / "report.json", tmp_path / "b" / "report.json"])
    write_report(merged, tmp_path / "merged")
    assert (tmp_path / "merged" / "report.md").read_text() == (tmp_path / "one" / "report.md").read_text()
    data = json.loads((tmp_path / "one" / "report.json").read_text())
    assert data["config"] == {"seed": 0}
    assert data["outcomes"][0]["aggregate"][KEY]["n"] == 80
    tsv = (tmp_path / "one" / "report.tsv").read_text().splitlines()
    assert tsv[0].split("\t") == ["model", "label", "target", "task", "metric", "k", "mean", "ci_low", "ci_high", "n"]
    assert len(tsv) == 1 + 2 * 2
