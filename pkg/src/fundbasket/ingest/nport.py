"""NPORT-P XML parsing into holding records."""
from __future__ import annotations

import logging
import re
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import pandas as pd

from ..exceptions import ParseError
from ..quarters import to_quarter
from .edgar import RawFiling

logger = logging.getLogger(__name__)

CUSIP_RE = re.compile(r"^[0-9A-Z*@#]{8}[0-9]$")
PAYOFF_PROFILES = ("Long", "Short", "NA")
NPORT_NS = "http://www.sec.gov/edgar/nport"


def is_valid_cusip(value) -> bool:
    """Nine-character CUSIP shape; all-zero placeholders are rejected."""
    if not isinstance(value, str):
        return False
    value = value.strip().upper()
    return bool(CUSIP_RE.match(value)) and value != "000000000"


@dataclass(frozen=True)
class HoldingRecord:
    fund_id: str
    cusip: str
    name: str
    balance: float
    value_usd: float
    payoff_profile: str
    quarter: pd.Period
    portfolio_value: Optional[float] = None
    accession_id: str = ""

    def __post_init__(self):
        if self.payoff_profile not in PAYOFF_PROFILES:
            raise ValueError(f"payoff profile must be one of {PAYOFF_PROFILES}")


def _text(node, tag: str) -> Optional[str]:
    child = node.find(f"{{*}}{tag}")
    if child is None or child.text is None:
        return None
    return child.text.strip()


def _payoff(raw: Optional[str]) -> str:
    if raw in ("Long", "Short"):
        return raw
    return "NA"


def fund_identifier(root) -> Optional[str]:
    """Series id of the filing (falls back to the registrant CIK)."""
    for path in (".//{*}genInfo/{*}seriesId", ".//{*}seriesClassInfo/{*}seriesId",
                 ".//{*}genInfo/{*}regCik", ".//{*}issuerCredentials/{*}cik"):
        node = root.find(path)
        if node is not None and node.text and node.text.strip():
            return node.text.strip()
    return None


def parse_nport(filing: RawFiling, counters: Optional[Counter] = None) -> list[HoldingRecord]:
    """One record per ``<invstOrSec>`` carrying a valid CUSIP.

    Entries with an invalid CUSIP increment ``counters['invalid_cusip']``;
    entries missing a mandatory element (balance, valUSD) increment
    ``counters['missing_element']``.
    """
    counters = counters if counters is not None else Counter()
    try:
        root = ET.fromstring(filing.body)
    except ET.ParseError as exc:
        raise ParseError(filing.accession_id, f"malformed XML: {exc}") from exc
    fund_id = fund_identifier(root)
    if fund_id is None:
        raise ParseError(filing.accession_id, "no series or registrant identifier")
    entries = root.findall(".//{*}invstOrSecs/{*}invstOrSec")

    parsed = []
    total = 0.0
    for entry in entries:
        try:
            value = float(_text(entry, "valUSD"))
            balance = float(_text(entry, "balance"))
        except (TypeError, ValueError):
            counters["missing_element"] += 1
            continue
        if value > 0:
            total += value
        cusip = (_text(entry, "cusip") or "").upper()
        if not is_valid_cusip(cusip):
            counters["invalid_cusip"] += 1
            continue
        parsed.append((cusip, _text(entry, "name") or "", balance, value, _payoff(_text(entry, "payoffProfile"))))
    if counters["missing_element"]:
        logger.debug("%s: %d entries missing mandatory elements", filing.accession_id, counters["missing_element"])

    quarter = to_quarter(filing.report_quarter)
    return [HoldingRecord(fund_id, cusip, name, abs(balance), abs(value), payoff, quarter,
                          total or None, filing.accession_id)
            for cusip, name, balance, value, payoff in parsed]


def render_nport(records: Sequence[HoldingRecord], period_date: str, series_id: Optional[str] = None,
                 cik: str = "0000000000") -> bytes:
    """Minimal NPORT-P document carrying ``records`` (used for round-trip checks and fixtures)."""
    series_id = series_id or (records[0].fund_id if records else "S000000000")
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<edgarSubmission xmlns="{NPORT_NS}">',
        "  <headerData>",
        "    <submissionType>NPORT-P</submissionType>",
        f"    <filerInfo><filer><issuerCredentials><cik>{cik}</cik></issuerCredentials></filer>"
        f"<seriesClassInfo><seriesId>{escape(series_id)}</seriesId></seriesClassInfo></filerInfo>",
        "  </headerData>",
        "  <formData>",
        f"    <genInfo><regCik>{cik}</regCik><seriesId>{escape(series_id)}</seriesId>"
        f"<repPdDate>{period_date}</repPdDate></genInfo>",
        "    <invstOrSecs>",
    ]
    for r in records:
        payoff = "N/A" if r.payoff_profile == "NA" else r.payoff_profile
        lines.append(
            "      <invstOrSec>"
            f"<name>{escape(r.name)}</name><title>{escape(r.name)}</title><cusip>{r.cusip}</cusip>"
            f"<balance>{r.balance!r}</balance><units>NS</units><curCd>USD</curCd>"
            f"<valUSD>{r.value_usd!r}</valUSD><payoffProfile>{payoff}</payoffProfile>"
            "<assetCat>EC</assetCat></invstOrSec>"
        )
    lines += ["    </invstOrSecs>", "  </formData>", "</edgarSubmission>", ""]
    return "\n".join(lines).encode()
