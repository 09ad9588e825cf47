"""JSON / Markdown / TSV reports in the layout of a model-by-task results table."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from ..models import DISPLAY_NAMES
from ..quarters import format_quarter
from ..stats import markdown_table
from .harness import ALL_TASKS, METRICS, EvalOutcome, TaskKind, metric_key, significantly_different

COLUMN_TASKS = (TaskKind.NBR, TaskKind.NBRR, TaskKind.NNBR)


def _aligned(a: EvalOutcome, b: EvalOutcome, key: str):
    pos = {f: i for i, f in enumerate(b.fund_ids)}
    common = [(i, pos[f]) for i, f in enumerate(a.fund_ids) if f in pos]
    ia = np.array([c[0] for c in common], dtype=int)
    ib = np.array([c[1] for c in common], dtype=int)
    return a.values[key][ia], b.values[key][ib]


def mark_column(outcomes: Sequence[EvalOutcome], key: str, level: float = 0.95,
                resamples: int = 2000, seed: int = 0) -> dict[int, str]:
    """Decorations for one column: ``{position: 'best' | 'runner_up'}``.

    The top mean is marked best only if its paired bootstrap difference to
    the second is significant; the second is marked runner-up only if it
    differs significantly from the third (or, with two models, when the best
    was marked).
    """
    ranked = [(o.mean(key), i) for i, o in enumerate(outcomes) if key in o.values and o.mean(key) is not None]
    ranked.sort(key=lambda t: (-t[0], t[1]))
    marks = {}
    if len(ranked) < 2:
        return marks

    def sig(x, y):
        a, b = _aligned(outcomes[x], outcomes[y], key)
        return significantly_different(a, b, level, resamples, seed)

    first, second = ranked[0][1], ranked[1][1]
    if sig(first, second):
        marks[first] = "best"
    if len(ranked) >= 3:
        if sig(second, ranked[2][1]):
            marks[second] = "runner_up"
    elif first in marks:
        marks[second] = "runner_up"
    return marks


def _columns(outcomes: Sequence[EvalOutcome], k: int):
    labels = []
    for o in outcomes:
        if (o.label, o.target) not in labels:
            labels.append((o.label, o.target))
    labels.sort(key=lambda lt: lt[1])
    tasks = [t for t in COLUMN_TASKS if any(TaskKind.parse(x) is t for o in outcomes for x in o.tasks)]
    return [(t, m, lt) for t in tasks for m in METRICS for lt in labels
            if any(metric_key(t, m, k) in o.values for o in outcomes)]


def comparison_rows(outcomes: Sequence[EvalOutcome], k: int = 20, level: float = 0.95,
                    resamples: int = 2000, seed: int = 0):
    """Header and rows (model x task/metric/target) with best / runner-up markup."""
    models = list(dict.fromkeys(o.model for o in outcomes))
    columns = _columns(outcomes, k)
    header = ["Model"] + [f"{t.value} {m}@{k} {format_quarter(lt[1])}" for t, m, lt in columns]
    cells = {name: ["-"] * len(columns) for name in models}
    for c, (task, metric, (label, target)) in enumerate(columns):
        key = metric_key(task, metric, k)
        group = [o for o in outcomes if o.target == target and o.label == label and key in o.values]
        marks = mark_column(group, key, level, resamples, seed)
        for i, o in enumerate(group):
            mean = o.mean(key)
            text = "n/a" if mean is None else f"{mean:.3f}"
            if marks.get(i) == "best":
                text = f"**{text}**"
            elif marks.get(i) == "runner_up":
                text = f"<u>{text}</u>"
            cells[o.model][c] = text
    rows = [[DISPLAY_NAMES.get(m, m), *cells[m]] for m in models]
    return header, rows


def comparison_markdown(outcomes: Sequence[EvalOutcome], k: int = 20, **kwargs) -> str:
    header, rows = comparison_rows(outcomes, k, **kwargs)
    note = ("Best model in bold and runner-up underlined when the paired bootstrap "
            "difference is significant at the 95% level.\n\n")
    return note + markdown_table(header, rows)


def tsv_rows(outcomes: Iterable[EvalOutcome], level: float = 0.95, resamples: int = 2000, seed: int = 0):
    yield ("model", "label", "target", "task", "metric", "k", "mean", "ci_low", "ci_high", "n")
    for o in outcomes:
        for task in o.tasks:
            for metric in METRICS:
                for k in o.ks:
                    key = metric_key(task, metric, k)
                    mean = o.mean(key)
                    ci = o.ci(key, level, resamples, seed)
                    n = int(np.count_nonzero(~np.isnan(o.values[key])))
                    yield (o.model, o.label, format_quarter(o.target), TaskKind.parse(task).value, metric, k,
                           "" if mean is None else repr(mean),
                           "" if ci is None else repr(ci[0]), "" if ci is None else repr(ci[1]), n)


def write_report(outcomes: Sequence[EvalOutcome], out_dir, config: Optional[dict] = None,
                 k: Optional[int] = None, level: float = 0.95, resamples: int = 2000, seed: int = 0) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if k is None:
        ks = sorted({kk for o in outcomes for kk in o.ks})
        k = 20 if 20 in ks else ks[-1]
    payload = {
        "config": config or {},
        "bootstrap": {"level": level, "resamples": resamples, "seed": seed},
        "outcomes": [o.to_dict(level, resamples, seed) for o in outcomes],
    }
    paths = {"json": out_dir / "report.json", "markdown": out_dir / "report.md", "tsv": out_dir / "report.tsv"}
    paths["json"].write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    paths["markdown"].write_text(comparison_markdown(outcomes, k, level=level, resamples=resamples, seed=seed))
    with open(paths["tsv"], "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerows(tsv_rows(outcomes, level, resamples, seed))
    return paths


def load_outcomes(paths: Iterable) -> tuple[list[EvalOutcome], dict]:
    outcomes, bootstrap = [], {}
    for path in paths:
        data = json.loads(Path(path).read_text())
        bootstrap = bootstrap or data.get("bootstrap", {})
        outcomes.extend(EvalOutcome.from_dict(o) for o in data["outcomes"])
    return outcomes, bootstrap


__all__ = ["mark_column", "comparison_rows", "comparison_markdown", "write_report", "load_outcomes", "ALL_TASKS"]
