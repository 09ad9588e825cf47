"""NPORT-P download, parsing, OpenFIGI enrichment and holding filters."""
from .edgar import EdgarClient, RawFiling, fetch_filings
from .figi import FigiClient, SecurityMeta, enrich
from .filters import apply_filters
from .nport import HoldingRecord, parse_nport
from .pipeline import run_ingest

__all__ = ["EdgarClient", "RawFiling", "fetch_filings", "FigiClient", "SecurityMeta", "enrich",
           "apply_filters", "HoldingRecord", "parse_nport", "run_ingest"]
