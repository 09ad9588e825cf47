"""Calendar-quarter helpers built on :class:`pandas.Period`."""
from __future__ import annotations

import datetime as dt
from typing import Iterable, Union

import pandas as pd

QuarterLike = Union[str, pd.Period, dt.date]


def to_quarter(value: QuarterLike) -> pd.Period:
    """Coerce ``'2021Q1'``, ``'2021-03-31'``, a date or a Period to a quarterly Period."""
    if isinstance(value, pd.Period):
        if value.freqstr.startswith("Q"):
            return value
        return value.asfreq("Q-DEC")
    if isinstance(value, str):
        value = value.strip()
    try:
        return pd.Period(value, freq="Q-DEC")
    except (ValueError, TypeError) as exc:
        raise ValueError(f"cannot interpret {value!r} as a calendar quarter") from exc


def quarter_range(start: QuarterLike, end: QuarterLike) -> list[pd.Period]:
    start, end = to_quarter(start), to_quarter(end)
    if end < start:
        raise ValueError(f"empty quarter range {start}..{end}")
    return list(pd.period_range(start, end, freq="Q-DEC"))


def quarter_start_epoch(q: QuarterLike) -> float:
    """UTC epoch seconds of the first instant of the quarter."""
    ts = to_quarter(q).start_time.tz_localize("UTC")
    return float(ts.timestamp())


def quarter_from_epoch(seconds: float) -> pd.Period:
    return to_quarter(pd.Timestamp(seconds, unit="s"))


def format_quarter(q: QuarterLike) -> str:
    return str(to_quarter(q))


def sorted_quarters(quarters: Iterable[QuarterLike]) -> list[pd.Period]:
    return sorted({to_quarter(q) for q in quarters})
