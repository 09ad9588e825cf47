"""End-to-end ingestion: fetch, parse, reconcile amendments, enrich, filter, write."""
from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

from ..quarters import QuarterLike, format_quarter
from .edgar import EdgarClient, RawFiling, fetch_filings
from .figi import FigiClient, SecurityMeta, enrich
from .filters import apply_filters
from .nport import HoldingRecord, parse_nport

logger = logging.getLogger(__name__)

HOLDINGS_HEADER = ("fund_id", "cusip", "ticker", "quarter", "value_usd", "weight")


@dataclass
class IngestReport:
    filings: int = 0
    superseded_filings: int = 0
    parsed_records: int = 0
    retained_records: int = 0
    parse_drops: Counter = field(default_factory=Counter)
    filter_drops: Counter = field(default_factory=Counter)
    fetch_errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "filings": self.filings,
            "superseded_filings": self.superseded_filings,
            "parsed_records": self.parsed_records,
            "retained_records": self.retained_records,
            "parse_drops": dict(sorted(self.parse_drops.items())),
            "filter_drops": dict(sorted(self.filter_drops.items())),
            "fetch_errors": [vars(e) for e in self.fetch_errors],
        }


def latest_filings(parsed: Iterable[tuple[RawFiling, list[HoldingRecord]]], report: Optional[IngestReport] = None):
    """Keep only the latest filing per (fund, quarter), ordered by filing date then accession."""
    best = {}
    for filing, records in parsed:
        if not records:
            continue
        key = (records[0].fund_id, records[0].quarter)
        rank = (filing.filing_date, filing.accession_id)
        if key in best:
            if report is not None:
                report.superseded_filings += 1
            if best[key][0] >= rank:
                continue
        best[key] = (rank, records)
    return [best[k][1] for k in sorted(best, key=lambda k: (k[1], k[0]))]


def holdings_rows(records: Iterable[HoldingRecord], meta: Mapping[str, SecurityMeta]) -> list[tuple]:
    """Aggregate duplicates per (fund, cusip, quarter) and attach allocation weights."""
    agg = {}
    for r in records:
        key = (r.fund_id, r.cusip, r.quarter)
        value, portfolio = agg.get(key, (0.0, r.portfolio_value))
        agg[key] = (value + r.value_usd, portfolio)
    rows = []
    for (fund, cusip, quarter), (value, portfolio) in sorted(agg.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])):
        m = meta.get(cusip)
        weight = value / portfolio if portfolio else float("nan")
        rows.append((fund, cusip, (m.ticker if m and m.ticker else ""), format_quarter(quarter), value, weight))
    return rows


def write_holdings(rows: Iterable[tuple], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(HOLDINGS_HEADER)
        for fund, cusip, ticker, quarter, value, weight in rows:
            writer.writerow((fund, cusip, ticker, quarter, repr(float(value)), repr(float(weight))))
    return path


def run_ingest(ciks: Iterable, window: Iterable[QuarterLike], cache_dir, out_path,
               edgar_client: Optional[EdgarClient] = None, figi_client: Optional[FigiClient] = None,
               **client_kwargs) -> IngestReport:
    report = IngestReport()
    client = edgar_client or EdgarClient(cache_dir, **client_kwargs)
    parsed = []
    for filing in fetch_filings(ciks, window, client=client):
        report.filings += 1
        parsed.append((filing, parse_nport(filing, report.parse_drops)))
    report.fetch_errors = list(client.errors)
    groups = latest_filings(parsed, report)
    records = [r for group in groups for r in group]
    report.parsed_records = len(records)
    meta = enrich({r.cusip for r in records}, cache_dir, figi_client)
    kept = apply_filters(records, meta, report.filter_drops)
    report.retained_records = len(kept)
    write_holdings(holdings_rows(kept, meta), out_path)
    logger.info("ingested %d filings, kept %d of %d records", report.filings, len(kept), len(records))
    return report
