from __future__ import annotations

from collections import Counter
from typing import Iterable, Mapping, Optional

from .figi import SecurityMeta
from .nport import HoldingRecord, is_valid_cusip

MIN_VALUE_USD = 10_000.0

# (drop-counter name, predicate) in evaluation order
PREDICATES = (
    ("invalid_cusip", lambda r, m: is_valid_cusip(r.cusip)),
    ("not_us_listed", lambda r, m: m is not None and m.is_us_listed),
    ("not_common_stock", lambda r, m: m is not None and m.security_type == "Common Stock"),
    ("not_long", lambda r, m: r.payoff_profile == "Long"),
    ("below_min_value", lambda r, m: r.value_usd >= MIN_VALUE_USD),
)


def apply_filters(records: Iterable[HoldingRecord], meta: Mapping[str, SecurityMeta],
                  counts: Optional[Counter] = None) -> list[HoldingRecord]:
    """Keep US-listed long common-stock positions worth at least 10,000 USD.

    Each dropped record is charged to the first predicate it fails.
    """
    counts = counts if counts is not None else Counter()
    kept = []
    for rec in records:
        m = meta.get(rec.cusip)
        for name, ok in PREDICATES:
            if not ok(rec, m):
                counts[name] += 1
                break
        else:
            kept.append(rec)
    return kept
