"""Descriptive statistics of a panel: portfolio size, turnover, stock presence."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .dataset import DEFAULT_REPEAT_WINDOW, PanelDataset, explore_mask
from .exceptions import DataError
from .quarters import QuarterLike, format_quarter, to_quarter

DESCRIBE_COLUMNS = ("mean", "std", "min", "25%", "50%", "75%", "max")


def describe(values) -> dict:
    """mean / population std / min / linear-interpolated quartiles / max."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return {c: float("nan") for c in DESCRIBE_COLUMNS}
    q = np.percentile(v, [0, 25, 50, 75, 100])
    return dict(zip(DESCRIBE_COLUMNS, [float(v.mean()), float(v.std()), *map(float, q)]))


def markdown_table(headers: Sequence[str], rows: Iterable[Sequence], align: str | None = None) -> str:
    headers = [str(h) for h in headers]
    align = align or "l" + "r" * (len(headers) - 1)
    marks = {"l": ":---", "r": "---:", "c": ":---:"}
    lines = ["| " + " | ".join(headers) + " |",
             "| " + " | ".join(marks[a] for a in align) + " |"]
    for row in rows:
        lines.append("| " + " | ".join(str(c) for c in row) + " |")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PortfolioStats:
    quarter: pd.Period
    n_funds: int
    size: dict
    mean_alloc_pct: dict

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([self.size, self.mean_alloc_pct], index=["Portfolio Size", "% Mean Alloc."],
                            columns=list(DESCRIBE_COLUMNS))

    def to_markdown(self) -> str:
        rows = [["Portfolio Size", *(_fmt(self.size[c], 1) for c in DESCRIBE_COLUMNS)],
                ["% Mean Alloc.", *(_fmt(self.mean_alloc_pct[c], 2) for c in DESCRIBE_COLUMNS)]]
        return f"Portfolio summary statistics for {self.quarter}\n\n" + markdown_table(["", *DESCRIBE_COLUMNS], rows)


def _fmt(x: float, digits: int) -> str:
    if np.isnan(x):
        return "nan"
    return f"{x:.{digits}f}"


def summary_stats(panel: PanelDataset, quarter: QuarterLike) -> PortfolioStats:
    """Distribution over funds of basket size and of mean per-stock allocation (%)."""
    W = panel.weights(quarter)
    sizes = np.diff(W.indptr)
    present = sizes > 0
    totals = np.asarray(W.sum(axis=1)).ravel()
    mean_alloc = 100.0 * totals[present] / sizes[present]
    return PortfolioStats(to_quarter(quarter), int(present.sum()), describe(sizes[present]), describe(mean_alloc))


@dataclass(frozen=True)
class TurnoverStats:
    quarter: pd.Period
    per_fund: pd.Series
    summary: dict


def turnover_stats(panel: PanelDataset, quarter: QuarterLike) -> TurnoverStats:
    """Share (%) of each fund's basket that was not held the previous quarter.

    Funds without a basket in either quarter are left out.
    """
    q = to_quarter(quarter)
    if q - 1 not in panel.quarters:
        raise DataError(f"turnover at {q} needs {q - 1} in the panel")
    now, before = panel.incidence(q), panel.incidence(q - 1)
    funds = np.flatnonzero(panel.present(q) & panel.present(q - 1))
    size = np.asarray(now.sum(axis=1)).ravel()
    kept = np.asarray(now.multiply(before).sum(axis=1)).ravel()
    pct = 100.0 * (size[funds] - kept[funds]) / size[funds]
    series = pd.Series(pct, index=[panel.vocab.fund_ids[u] for u in funds], name=format_quarter(q))
    return TurnoverStats(q, series, describe(pct))


def turnover_table(panel: PanelDataset, quarters: Sequence[QuarterLike]) -> pd.DataFrame:
    cols = {}
    for q in quarters:
        cols[format_quarter(q)] = turnover_stats(panel, q).summary
    return pd.DataFrame(cols).reindex(list(DESCRIBE_COLUMNS))


def turnover_markdown(table: pd.DataFrame) -> str:
    rows = [[stat, *(f"{v:.1f}%" for v in table.loc[stat])] for stat in table.index]
    return "Summary statistics for portfolio turnover\n\n" + markdown_table(["", *table.columns], rows)


def presence_stats(panel: PanelDataset, quarter: QuarterLike, window: int = DEFAULT_REPEAT_WINDOW):
    """Overall and explore presence (%) of every item at ``quarter``.

    Overall: share of funds present at the quarter that hold the item.
    Explore: share of those funds for which the holding is also novel with
    respect to the trailing ``window`` quarters. Both frames are sorted by
    descending percentage, ties by item index.
    """
    q = to_quarter(quarter)
    held = panel.incidence(q)
    n = int(panel.present(q).sum())
    if n == 0:
        raise DataError(f"no fund holds a basket at {q}")
    repeat = explore_mask(panel, q, window).repeat
    novel = held - held.multiply(repeat)
    frames = []
    for mat in (held, novel):
        counts = np.asarray(mat.sum(axis=0)).ravel()
        df = pd.DataFrame({
            "item": panel.vocab.item_ids,
            "label": [panel.vocab.label(i) for i in range(panel.n_items)],
            "funds": counts.astype(int),
            "pct": 100.0 * counts / n,
        })
        df["index"] = np.arange(len(df))
        df = df.sort_values(["pct", "index"], ascending=[False, True], kind="mergesort")
        frames.append(df.drop(columns="index").reset_index(drop=True))
    return frames[0], frames[1]


def presence_markdown(overall: pd.DataFrame, explore: pd.DataFrame, quarter, top: int = 10) -> str:
    rows = []
    for r in range(min(top, len(overall))):
        o = overall.iloc[r]
        e = explore.iloc[r] if r < len(explore) else None
        rows.append([r + 1, o["label"], f"{o['pct']:.1f}",
                     e["label"] if e is not None else "", f"{e['pct']:.1f}" if e is not None else ""])
    head = f"Overall and explore presence of stocks in portfolios for {format_quarter(quarter)}\n\n"
    return head + markdown_table(["", "Top Overall", "%", "Top Explore", "%"], rows, align="rlrlr")
