"""OpenFIGI enrichment of CUSIPs with listing venue and security type.

Resolved metadata is kept as one JSON document per CUSIP under
``<cache_dir>/figi/``.
"""
from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional

import requests

from ..exceptions import CacheCorruptionError
from .edgar import RateLimiter, _atomic_write

logger = logging.getLogger(__name__)

FIGI_URL = "https://api.openfigi.com/v3/mapping"
BATCH_SIZE = 100
# Bloomberg exchange codes of US venues, OTC included
US_EXCHANGE_CODES = frozenset({
    "US", "UA", "UB", "UC", "UD", "UF", "UM", "UN", "UP", "UQ", "UR", "UT", "UU", "UV", "UW", "UX",
    "VJ", "VK", "VY", "PQ",
})


@dataclass(frozen=True)
class SecurityMeta:
    cusip: str
    ticker: Optional[str] = None
    is_us_listed: bool = False
    security_type: str = ""
    composite_figi: Optional[str] = None
    status: str = "matched"  # matched | no_match | failed

    @property
    def resolved(self) -> bool:
        return self.status == "matched"


def meta_from_response(cusip: str, item: dict) -> SecurityMeta:
    """Pick the instrument to describe ``cusip`` from one mapping-job result."""
    if "data" not in item:
        if "warning" in item:
            return SecurityMeta(cusip, status="no_match")
        return SecurityMeta(cusip, status="failed")
    data = item["data"]
    if not data:
        return SecurityMeta(cusip, status="no_match")

    def rank(d):
        code = d.get("exchCode")
        return (code != "US", code not in US_EXCHANGE_CODES, d.get("securityType") != "Common Stock")

    best = min(data, key=rank)
    return SecurityMeta(
        cusip,
        ticker=best.get("ticker"),
        is_us_listed=best.get("exchCode") in US_EXCHANGE_CODES,
        security_type=best.get("securityType") or "",
        composite_figi=best.get("compositeFIGI"),
    )


class MetadataStore:
    """One JSON file per CUSIP; failed lookups are never persisted."""

    def __init__(self, cache_dir):
        self.root = Path(cache_dir) / "figi"
        self._lock = threading.Lock()

    def get(self, cusip: str) -> Optional[SecurityMeta]:
        path = self.root / f"{cusip}.json"
        if not path.exists():
            return None
        try:
            return SecurityMeta(**json.loads(path.read_text()))
        except (ValueError, TypeError) as exc:
            raise CacheCorruptionError(f"corrupt metadata {path}: {exc}") from exc

    def put(self, meta: SecurityMeta):
        if meta.status == "failed":
            return
        payload = json.dumps(asdict(meta), sort_keys=True).encode()
        _atomic_write(self.root / f"{meta.cusip}.json", payload, self._lock)


class FigiClient:
    def __init__(self, session=None, api_key: Optional[str] = None, max_attempts: int = 6,
                 backoff: float = 1.0, rate_limiter: Optional[RateLimiter] = None, sleep=time.sleep):
        self.session = session if session is not None else requests.Session()
        self.api_key = api_key
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.limiter = rate_limiter or RateLimiter(per_second=4)
        self._sleep = sleep
        self.network_calls = 0

    def map_batch(self, cusips: list[str]) -> list[SecurityMeta]:
        if len(cusips) > BATCH_SIZE:
            raise ValueError(f"OpenFIGI batches hold at most {BATCH_SIZE} identifiers")
        jobs = [{"idType": "ID_CUSIP", "idValue": c} for c in cusips]
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["X-OPENFIGI-APIKEY"] = self.api_key
        for attempt in range(self.max_attempts):
            self.limiter.wait()
            self.network_calls += 1
            try:
                resp = self.session.post(FIGI_URL, json=jobs, headers=headers, timeout=30)
            except requests.RequestException as exc:
                logger.warning("OpenFIGI request failed: %s", exc)
                self._sleep(self.backoff * 2 ** attempt)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                self._sleep(self.backoff * 2 ** attempt)
                continue
            if resp.status_code != 200:
                break
            results = resp.json()
            if len(results) != len(cusips):
                break
            return [meta_from_response(c, r) for c, r in zip(cusips, results)]
        logger.warning("OpenFIGI lookup failed for %d identifiers", len(cusips))
        return [SecurityMeta(c, status="failed") for c in cusips]


def enrich(cusips: Iterable[str], cache_dir, client: Optional[FigiClient] = None) -> dict[str, SecurityMeta]:
    """Map every CUSIP to metadata, querying the provider only for unseen ones."""
    store = MetadataStore(cache_dir)
    out = {}
    todo = []
    for cusip in sorted(set(cusips)):
        meta = store.get(cusip)
        if meta is None:
            todo.append(cusip)
        else:
            out[cusip] = meta
    if todo:
        client = client or FigiClient()
        for start in range(0, len(todo), BATCH_SIZE):
            for meta in client.map_batch(todo[start:start + BATCH_SIZE]):
                store.put(meta)
                out[meta.cusip] = meta
    return out
