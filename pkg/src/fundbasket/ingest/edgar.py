"""SEC EDGAR client for NPORT-P filings with an on-disk cache.

Cache layout under ``cache_dir``::

    edgar/<accession_id>.xml
    edgar/submissions/CIK##########.json
"""
from __future__ import annotations

import json
import logging
import os
import re
import tempfile
import threading
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

import pandas as pd
import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from ..exceptions import CacheCorruptionError
from ..quarters import QuarterLike, to_quarter

logger = logging.getLogger(__name__)

SUBMISSIONS_URL = "https://data.sec.gov/submissions/{name}"
ARCHIVE_URL = "https://www.sec.gov/Archives/edgar/data/{cik}/{accession}/primary_doc.xml"
NPORT_FORMS = ("NPORT-P", "NPORT-P/A")
DEFAULT_USER_AGENT = "fundbasket research tool admin@example.org"
MAX_REQUESTS_PER_SECOND = 10


@dataclass(frozen=True)
class RawFiling:
    accession_id: str
    cik: str
    report_quarter: pd.Period
    body: bytes
    filing_date: str = ""
    form: str = "NPORT-P"


@dataclass(frozen=True)
class FetchError:
    accession_id: str
    cik: str
    reason: str


def normalize_cik(cik) -> str:
    digits = re.sub(r"\D", "", str(cik))
    if not digits:
        raise ValueError(f"invalid CIK {cik!r}")
    return digits.zfill(10)


def period_of_report(body: bytes) -> Optional[str]:
    """``repPdDate`` of an NPORT document, or None when absent."""
    root = ET.fromstring(body)
    node = root.find(".//{*}genInfo/{*}repPdDate")
    return node.text.strip() if node is not None and node.text else None


class RateLimiter:
    """Minimum spacing between calls, shared across threads."""

    def __init__(self, per_second: float = MAX_REQUESTS_PER_SECOND, clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / per_second
        self._clock, self._sleep = clock, sleep
        self._next = 0.0
        self._lock = threading.Lock()

    def wait(self):
        with self._lock:
            now = self._clock()
            if now < self._next:
                self._sleep(self._next - now)
                now = self._next
            self._next = now + self.interval


def make_session(user_agent: str = DEFAULT_USER_AGENT, retries: int = 3) -> requests.Session:
    if not user_agent or "@" not in user_agent:
        raise ValueError("EDGAR requires a user agent that includes a contact e-mail")
    session = requests.Session()
    retry = Retry(total=retries, backoff_factor=0.5, status_forcelist=(429, 500, 502, 503, 504),
                  allowed_methods=("GET", "POST"))
    session.mount("https://", HTTPAdapter(max_retries=retry))
    session.headers.update({"User-Agent": user_agent, "Accept-Encoding": "gzip, deflate"})
    return session


def _atomic_write(path: Path, data: bytes, lock: threading.Lock):
    path.parent.mkdir(parents=True, exist_ok=True)
    with lock:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)


class EdgarClient:
    """Fetch NPORT-P filings, serving from ``cache_dir`` whenever possible."""

    def __init__(self, cache_dir, session=None, user_agent: str = DEFAULT_USER_AGENT,
                 rate_limiter: Optional[RateLimiter] = None, timeout: float = 30.0):
        self.cache_dir = Path(cache_dir)
        self.session = session if session is not None else make_session(user_agent)
        self.limiter = rate_limiter or RateLimiter()
        self.timeout = timeout
        self.errors: list[FetchError] = []
        self.network_calls = 0
        self._write_lock = threading.Lock()

    @property
    def edgar_dir(self) -> Path:
        return self.cache_dir / "edgar"

    def _get(self, url: str) -> bytes:
        self.limiter.wait()
        self.network_calls += 1
        resp = self.session.get(url, timeout=self.timeout)
        resp.raise_for_status()
        return resp.content

    def submissions(self, cik: str) -> list[dict]:
        """Filing index rows (merged across paged submission files)."""
        cik = normalize_cik(cik)
        rows = []
        for data in self._submission_pages(f"CIK{cik}.json"):
            recent = data.get("filings", {}).get("recent", data)
            n = len(recent.get("accessionNumber", []))
            for i in range(n):
                rows.append({k: recent[k][i] for k in ("accessionNumber", "form", "reportDate", "filingDate")
                             if k in recent})
        return rows

    def _submission_pages(self, name: str) -> Iterator[dict]:
        data = self._cached_json(name)
        yield data
        for extra in data.get("filings", {}).get("files", []):
            yield self._cached_json(extra["name"])

    def _cached_json(self, name: str) -> dict:
        path = self.edgar_dir / "submissions" / name
        if path.exists():
            try:
                return json.loads(path.read_bytes())
            except ValueError as exc:
                raise CacheCorruptionError(f"corrupt cached index {path}: {exc}") from exc
        raw = self._get(SUBMISSIONS_URL.format(name=name))
        data = json.loads(raw)
        _atomic_write(path, raw, self._write_lock)
        return data

    def document(self, cik: str, accession_id: str) -> bytes:
        path = self.edgar_dir / f"{accession_id}.xml"
        if path.exists():
            body = path.read_bytes()
            try:
                ET.fromstring(body)
            except ET.ParseError as exc:
                raise CacheCorruptionError(f"corrupt cached filing {path}: {exc}") from exc
            return body
        url = ARCHIVE_URL.format(cik=int(cik), accession=accession_id.replace("-", ""))
        body = self._get(url)
        ET.fromstring(body)
        _atomic_write(path, body, self._write_lock)
        return body


def fetch_filings(cik_set: Iterable, window: Iterable[QuarterLike], cache_dir=None,
                  client: Optional[EdgarClient] = None, **client_kwargs) -> Iterator[RawFiling]:
    """Yield every NPORT-P filing of the registrants whose report period lies in ``window``.

    Per-filing HTTP or XML failures are appended to ``client.errors`` and
    skipped; cache corruption raises.
    """
    window = {to_quarter(q) for q in window}
    if not window:
        raise ValueError("fetch window is empty")
    if client is None:
        client = EdgarClient(cache_dir, **client_kwargs)
    seen = set()
    for cik in sorted(normalize_cik(c) for c in cik_set):
        try:
            index = client.submissions(cik)
        except CacheCorruptionError:
            raise
        except (requests.RequestException, ValueError) as exc:
            client.errors.append(FetchError("", cik, f"submissions index: {exc}"))
            continue
        for row in sorted(index, key=lambda r: r["accessionNumber"]):
            if row.get("form") not in NPORT_FORMS or not row.get("reportDate"):
                continue
            if to_quarter(row["reportDate"]) not in window:
                continue
            acc = row["accessionNumber"]
            if acc in seen:
                continue
            seen.add(acc)
            try:
                body = client.document(cik, acc)
                period = period_of_report(body) or row["reportDate"]
            except CacheCorruptionError:
                raise
            except (requests.RequestException, ET.ParseError) as exc:
                client.errors.append(FetchError(acc, cik, str(exc)))
                logger.warning("skipping %s: %s", acc, exc)
                continue
            yield RawFiling(acc, cik, to_quarter(period), body, row.get("filingDate", ""), row["form"])
