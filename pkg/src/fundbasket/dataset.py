"""Fund x stock x quarter panel, interaction matrices, repeat/explore masks and splits."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
import scipy.sparse as sp

from .exceptions import DataError
from .quarters import (
    QuarterLike,
    format_quarter,
    quarter_from_epoch,
    quarter_start_epoch,
    to_quarter,
)

logger = logging.getLogger(__name__)

WEIGHT_SLACK = 1e-6
DEFAULT_REPEAT_WINDOW = 4
DEFAULT_HISTORY_LENGTH = 5
INTER_HEADER = ("user_id:token", "item_id:token", "timestamp:float", "rating:float")


@dataclass(frozen=True)
class Vocab:
    """Bijections between external fund / item identifiers and dense indices."""

    fund_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    item_labels: Optional[tuple[Optional[str], ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "fund_ids", tuple(str(f) for f in self.fund_ids))
        object.__setattr__(self, "item_ids", tuple(str(i) for i in self.item_ids))
        if len(set(self.fund_ids)) != len(self.fund_ids):
            raise DataError("duplicate fund identifiers in vocabulary")
        if len(set(self.item_ids)) != len(self.item_ids):
            raise DataError("duplicate item identifiers in vocabulary")
        if self.item_labels is not None:
            labels = tuple(self.item_labels)
            if len(labels) != len(self.item_ids):
                raise DataError("item_labels must align with item_ids")
            object.__setattr__(self, "item_labels", labels)
        object.__setattr__(self, "_fund_index", {f: i for i, f in enumerate(self.fund_ids)})
        object.__setattr__(self, "_item_index", {f: i for i, f in enumerate(self.item_ids)})

    @property
    def n_funds(self) -> int:
        return len(self.fund_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def fund_index(self, fund_id: str) -> int:
        return self._fund_index[str(fund_id)]

    def item_index(self, item_id: str) -> int:
        return self._item_index[str(item_id)]

    def label(self, item: int) -> str:
        if self.item_labels is not None and self.item_labels[item]:
            return self.item_labels[item]
        return self.item_ids[item]

    def to_dict(self) -> dict:
        out = {"fund_ids": list(self.fund_ids), "item_ids": list(self.item_ids)}
        if self.item_labels is not None:
            out["item_labels"] = list(self.item_labels)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Vocab":
        labels = data.get("item_labels")
        return cls(tuple(data["fund_ids"]), tuple(data["item_ids"]),
                   tuple(labels) if labels is not None else None)


@dataclass(frozen=True)
class Basket:
    fund: int
    quarter: pd.Period
    items: frozenset
    weights: Mapping[int, float]

    def __post_init__(self):
        if set(self.weights) != set(self.items):
            raise DataError("basket weights must be keyed by exactly its items")
        if any(w <= 0 for w in self.weights.values()):
            raise DataError("basket weights must be positive")
        if sum(self.weights.values()) > 1 + WEIGHT_SLACK:
            raise DataError(f"basket weights of fund {self.fund} at {self.quarter} sum above 1")


class PanelDataset:
    """Immutable set of per-fund quarterly baskets over a shared vocabulary.

    Each quarter is stored as a CSR matrix of allocation weights with one row
    per fund; a row without nonzeros means the fund has no basket that quarter.
    """

    def __init__(self, vocab: Vocab, quarters: Sequence[QuarterLike],
                 weights: Mapping[QuarterLike, sp.spmatrix]):
        self.vocab = vocab
        self.quarters = tuple(to_quarter(q) for q in quarters)
        if any(b <= a for a, b in zip(self.quarters, self.quarters[1:])):
            raise DataError("panel quarters must be strictly increasing")
        shape = (vocab.n_funds, vocab.n_items)
        stored = {}
        for q, mat in weights.items():
            q = to_quarter(q)
            if q not in self.quarters:
                raise DataError(f"basket quarter {q} is not one of the panel quarters")
            mat = sp.csr_matrix(mat, dtype=np.float64)
            if mat.shape != shape:
                raise DataError(f"weight matrix for {q} has shape {mat.shape}, expected {shape}")
            mat.eliminate_zeros()
            mat.sum_duplicates()
            mat.sort_indices()
            if mat.nnz and (mat.data.min() < 0 or not np.isfinite(mat.data).all()):
                raise DataError(f"negative or non-finite weight at {q}")
            if mat.nnz and np.asarray(mat.sum(axis=1)).max() > 1 + WEIGHT_SLACK:
                raise DataError(f"a basket at {q} has weights summing above 1")
            stored[q] = mat
        for q in self.quarters:
            stored.setdefault(q, sp.csr_matrix(shape, dtype=np.float64))
        self._weights = stored

    # -- basic accessors -------------------------------------------------

    @property
    def n_funds(self) -> int:
        return self.vocab.n_funds

    @property
    def n_items(self) -> int:
        return self.vocab.n_items

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_funds, self.n_items)

    def __repr__(self):
        span = f"{self.quarters[0]}..{self.quarters[-1]}" if self.quarters else "empty"
        return f"PanelDataset(funds={self.n_funds}, items={self.n_items}, quarters={span})"

    def _check_quarter(self, q: QuarterLike) -> pd.Period:
        q = to_quarter(q)
        if q not in self._weights:
            raise DataError(f"quarter {q} not in panel ({[str(x) for x in self.quarters]})")
        return q

    def weights(self, q: QuarterLike) -> sp.csr_matrix:
        """Allocation weights at quarter ``q`` (copy)."""
        return self._weights[self._check_quarter(q)].copy()

    def incidence(self, q: QuarterLike) -> sp.csr_matrix:
        """Binary fund x item holdings at quarter ``q``."""
        mat = self.weights(q)
        mat.data[:] = 1.0
        return mat

    def present(self, q: QuarterLike) -> np.ndarray:
        """Boolean mask of funds holding a basket at ``q``."""
        return np.diff(self._weights[self._check_quarter(q)].indptr) > 0

    def items_of(self, fund: int, q: QuarterLike) -> np.ndarray:
        mat = self._weights[self._check_quarter(q)]
        return mat.indices[mat.indptr[fund]:mat.indptr[fund + 1]].copy()

    def basket(self, fund: int, q: QuarterLike) -> Optional[Basket]:
        q = self._check_quarter(q)
        mat = self._weights[q]
        lo, hi = mat.indptr[fund], mat.indptr[fund + 1]
        if lo == hi:
            return None
        items = mat.indices[lo:hi]
        weights = {int(i): float(w) for i, w in zip(items, mat.data[lo:hi])}
        return Basket(fund, q, frozenset(weights), weights)

    def iter_baskets(self) -> Iterator[Basket]:
        for q in self.quarters:
            present = np.flatnonzero(self.present(q))
            for u in present:
                yield self.basket(int(u), q)

    def n_baskets(self) -> int:
        return int(sum(self.present(q).sum() for q in self.quarters))

    def previous_quarters(self, target: QuarterLike, window: int) -> list[pd.Period]:
        """Panel quarters inside the ``window`` calendar quarters strictly before ``target``."""
        target = to_quarter(target)
        return [q for q in self.quarters if target - window <= q < target]

    # -- derived panels --------------------------------------------------

    def restrict(self, quarters: Iterable[QuarterLike]) -> "PanelDataset":
        """Same vocabulary, only the given quarters (indices remain aligned)."""
        keep = sorted({self._check_quarter(q) for q in quarters})
        return PanelDataset(self.vocab, keep, {q: self._weights[q] for q in keep})

    def replace_quarter(self, q: QuarterLike, weights: sp.spmatrix) -> "PanelDataset":
        q = self._check_quarter(q)
        new = dict(self._weights)
        new[q] = weights
        return PanelDataset(self.vocab, self.quarters, new)

    def fingerprint(self) -> str:
        """SHA-256 over vocabulary, quarters and every stored weight."""
        h = hashlib.sha256()
        h.update(json.dumps(self.vocab.to_dict(), sort_keys=True).encode())
        for q in self.quarters:
            mat = self._weights[q]
            h.update(str(q).encode())
            for arr, dtype in ((mat.indptr, np.int64), (mat.indices, np.int64), (mat.data, np.float64)):
                h.update(np.ascontiguousarray(arr, dtype=dtype).tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, PanelDataset):
            return NotImplemented
        if self.vocab != other.vocab or self.quarters != other.quarters:
            return False
        return all((self._weights[q] != other._weights[q]).nnz == 0 for q in self.quarters)

    __hash__ = None

    @classmethod
    def from_baskets(cls, vocab: Vocab, quarters: Sequence[QuarterLike],
                     baskets: Iterable[Basket]) -> "PanelDataset":
        quarters = [to_quarter(q) for q in quarters]
        triples = {q: ([], [], []) for q in quarters}
        for b in baskets:
            rows, cols, vals = triples[to_quarter(b.quarter)]
            for item, w in b.weights.items():
                rows.append(b.fund)
                cols.append(item)
                vals.append(w)
        shape = (vocab.n_funds, vocab.n_items)
        mats = {q: sp.csr_matrix((v, (r, c)), shape=shape) for q, (r, c, v) in triples.items()}
        return cls(vocab, quarters, mats)


@dataclass(frozen=True)
class SplitSpec:
    """Out-of-time split.

    ``history`` is the model input; its last quarter doubles as the training
    target for models that need one. ``valid_target`` and ``test_target`` lie
    strictly after all history.
    """

    history: tuple
    fit_target: pd.Period
    valid_target: pd.Period
    test_target: pd.Period
    repeat_window: int = DEFAULT_REPEAT_WINDOW

    def __post_init__(self):
        history = tuple(sorted(to_quarter(q) for q in self.history))
        object.__setattr__(self, "history", history)
        for name in ("fit_target", "valid_target", "test_target"):
            object.__setattr__(self, name, to_quarter(getattr(self, name)))
        if not history:
            raise DataError("split history is empty")
        if history[-1] > self.fit_target:
            raise DataError("history must not extend past fit_target")
        if not (self.fit_target < self.valid_target < self.test_target):
            raise DataError("require fit_target < valid_target < test_target")
        if self.repeat_window < 1:
            raise DataError("repeat_window must be >= 1")

    @property
    def targets(self) -> dict[str, pd.Period]:
        return {"valid": self.valid_target, "test": self.test_target}

    def to_dict(self) -> dict:
        return {
            "history": [format_quarter(q) for q in self.history],
            "fit_target": format_quarter(self.fit_target),
            "valid_target": format_quarter(self.valid_target),
            "test_target": format_quarter(self.test_target),
            "repeat_window": self.repeat_window,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SplitSpec":
        return cls(tuple(data["history"]), data["fit_target"], data["valid_target"],
                   data["test_target"], int(data.get("repeat_window", DEFAULT_REPEAT_WINDOW)))


@dataclass(frozen=True)
class ExploreMask:
    """Novel (E=1) versus repeat (E=0) universe for one target quarter.

    Only the repeat side is stored, since it is sparse.
    """

    target: pd.Period
    window: int
    repeat: sp.csr_matrix = field(repr=False)

    @property
    def shape(self):
        return self.repeat.shape

    def repeat_row(self, fund: int) -> np.ndarray:
        row = np.zeros(self.shape[1], dtype=bool)
        lo, hi = self.repeat.indptr[fund], self.repeat.indptr[fund + 1]
        row[self.repeat.indices[lo:hi]] = True
        return row

    def novel_row(self, fund: int) -> np.ndarray:
        return ~self.repeat_row(fund)

    def toarray(self) -> np.ndarray:
        """Dense E with 1 marking novel items."""
        return (self.repeat.toarray() == 0).astype(np.int8)


# -- operations -----------------------------------------------------------


def build_panel(holdings, min_history: int = 2, window: Optional[Sequence[QuarterLike]] = None,
                item_column: str = "cusip") -> PanelDataset:
    """Assemble a panel from normalized holding records.

    ``holdings`` is a DataFrame (or iterable of mappings) with at least
    ``fund_id``, ``item_column``, ``quarter`` and ``value_usd``. A ``weight``
    column, when present, is used as the allocation fraction; otherwise values
    are normalized by the fund's total value in that quarter.
    """
    if min_history < 1:
        raise DataError("min_history must be >= 1")
    df = holdings if isinstance(holdings, pd.DataFrame) else pd.DataFrame(list(holdings))
    if df.empty:
        raise DataError("no holdings to build a panel from")
    missing = {"fund_id", item_column, "quarter", "value_usd"} - set(df.columns)
    if missing:
        raise DataError(f"holdings missing columns {sorted(missing)}")
    df = df.copy()
    df["fund_id"] = df["fund_id"].astype(str)
    df["item"] = df[item_column].astype(str)
    df["quarter"] = [to_quarter(q) for q in df["quarter"]]
    if window is not None:
        window = {to_quarter(q) for q in window}
        df = df[df["quarter"].isin(window)]
    df["value_usd"] = df["value_usd"].astype(float)
    if "weight" not in df.columns or df["weight"].isna().any():
        totals = df.groupby(["fund_id", "quarter"])["value_usd"].transform("sum")
        df["weight"] = df["value_usd"] / totals
    df = df[df["weight"] > 0]
    if df.empty:
        raise DataError("panel would contain zero holdings")
    agg = {"weight": "sum"}
    if "ticker" in df.columns:
        agg["ticker"] = "first"
    df = df.groupby(["fund_id", "item", "quarter"], as_index=False, sort=False).agg(agg)

    n_quarters = df.groupby("fund_id")["quarter"].nunique()
    keep = n_quarters.index[n_quarters >= min_history]
    dropped = len(n_quarters) - len(keep)
    if dropped:
        logger.info("dropped %d funds with fewer than %d quarters", dropped, min_history)
    df = df[df["fund_id"].isin(set(keep))]
    if df.empty:
        raise DataError(f"no fund has at least {min_history} quarters of baskets")

    fund_ids = sorted(df["fund_id"].unique())
    item_ids = sorted(df["item"].unique())
    labels = None
    if "ticker" in df.columns:
        first = df.dropna(subset=["ticker"]).groupby("item")["ticker"].first().to_dict()
        labels = tuple(first.get(i) if isinstance(first.get(i), str) and first.get(i) else None
                       for i in item_ids)
    vocab = Vocab(tuple(fund_ids), tuple(item_ids), labels)
    if window is not None:
        quarters = sorted(window)
    else:
        quarters = sorted(df["quarter"].unique())
    return _panel_from_frame(vocab, quarters, df)


def _panel_from_frame(vocab: Vocab, quarters, df: pd.DataFrame) -> PanelDataset:
    rows = df["fund_id"].map(vocab._fund_index).to_numpy()
    cols = df["item"].map(vocab._item_index).to_numpy()
    vals = df["weight"].to_numpy(dtype=float)
    qs = df["quarter"].to_numpy()
    mats = {}
    for q in quarters:
        sel = qs == q
        mats[q] = sp.csr_matrix((vals[sel], (rows[sel], cols[sel])), shape=(vocab.n_funds, vocab.n_items))
    return PanelDataset(vocab, quarters, mats)


def interaction_matrix(panel: PanelDataset, quarters: Iterable[QuarterLike]) -> sp.csr_matrix:
    """Binary incidence: 1 where the fund held the item in any of ``quarters``."""
    quarters = list(quarters)
    if not quarters:
        raise DataError("interaction_matrix needs a non-empty quarter range")
    total = sp.csr_matrix(panel.shape, dtype=np.float64)
    for q in quarters:
        total = total + panel.incidence(q)
    total.data[:] = 1.0
    total.eliminate_zeros()
    return total.tocsr()


def explore_mask(panel: PanelDataset, target: QuarterLike,
                 window: int = DEFAULT_REPEAT_WINDOW) -> ExploreMask:
    """Repeat/novel partition relative to the ``window`` quarters before ``target``."""
    target = to_quarter(target)
    if window < 1:
        raise DataError("window must be >= 1")
    if not panel.quarters or target <= panel.quarters[0]:
        raise DataError(f"target {target} is not after the panel start")
    prior = panel.previous_quarters(target, window)
    if not prior:
        raise DataError(f"no panel quarter within {window} quarters before {target}")
    return ExploreMask(target, window, interaction_matrix(panel, prior))


def temporal_split(panel: PanelDataset, history_length: int = DEFAULT_HISTORY_LENGTH,
                   repeat_window: int = DEFAULT_REPEAT_WINDOW) -> SplitSpec:
    """First ``history_length`` quarters as history, then validation and test targets."""
    need = history_length + 2
    if len(panel.quarters) < need:
        raise DataError(f"temporal split requires {need} quarters, panel has {len(panel.quarters)}")
    history = panel.quarters[:history_length]
    return SplitSpec(history, history[-1], panel.quarters[history_length],
                     panel.quarters[history_length + 1], repeat_window)


# -- atomic files -----------------------------------------------------------


def _format_float(x: float) -> str:
    return repr(float(x))


def write_inter(panel: PanelDataset, quarters: Iterable[QuarterLike], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(INTER_HEADER)
        for q in sorted(to_quarter(x) for x in quarters):
            mat = panel.weights(q)
            stamp = _format_float(quarter_start_epoch(q))
            for u in range(mat.shape[0]):
                lo, hi = mat.indptr[u], mat.indptr[u + 1]
                for i, w in zip(mat.indices[lo:hi], mat.data[lo:hi]):
                    writer.writerow((panel.vocab.fund_ids[u], panel.vocab.item_ids[i], stamp, _format_float(w)))
    return path


def export_atomic(panel: PanelDataset, split: SplitSpec, out_dir, name: str = "fundbasket") -> dict[str, Path]:
    """Write ``<name>.train.inter``, ``.valid.inter`` and ``.test.inter``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {out_dir}: {exc}") from exc
    parts = {
        "train": list(split.history),
        "valid": [split.valid_target],
        "test": [split.test_target],
    }
    written = {}
    for part, quarters in parts.items():
        try:
            written[part] = write_inter(panel, quarters, out_dir / f"{name}.{part}.inter")
        except OSError as exc:
            raise DataError(f"cannot write {part} atomic file: {exc}") from exc
    return written


def read_inter(paths: Iterable, vocab: Optional[Vocab] = None) -> PanelDataset:
    """Load one or more ``.inter`` files; ratings become allocation weights."""
    frames = []
    for path in paths:
        df = pd.read_csv(path, sep="\t", dtype={"user_id:token": str, "item_id:token": str},
                         float_precision="round_trip")
        if tuple(df.columns) != INTER_HEADER:
            raise DataError(f"{path}: unexpected header {list(df.columns)}")
        frames.append(df)
    df = pd.concat(frames, ignore_index=True)
    df.columns = ["fund_id", "item", "timestamp", "weight"]
    df["quarter"] = [quarter_from_epoch(t) for t in df["timestamp"]]
    if vocab is None:
        vocab = Vocab(tuple(sorted(df["fund_id"].unique())), tuple(sorted(df["item"].unique())))
    quarters = sorted(df["quarter"].unique())
    return _panel_from_frame(vocab, quarters, df)


def save_panel(panel: PanelDataset, out_dir, name: str = "panel",
               provenance: Optional[Mapping] = None) -> Path:
    """Standard panel files: ``panel.json`` metadata plus ``<name>.inter`` with every quarter."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inter = write_inter(panel, panel.quarters, out_dir / f"{name}.inter")
    meta = {
        "name": name,
        "n_funds": panel.n_funds,
        "n_items": panel.n_items,
        "n_baskets": panel.n_baskets(),
        "quarters": [format_quarter(q) for q in panel.quarters],
        "fingerprint": panel.fingerprint(),
        "inter_sha256": hashlib.sha256(inter.read_bytes()).hexdigest(),
        "provenance": dict(provenance or {}),
        "vocab": panel.vocab.to_dict(),
    }
    path = out_dir / "panel.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_panel(panel_dir) -> PanelDataset:
    panel_dir = Path(panel_dir)
    meta_path = panel_dir / "panel.json"
    if not meta_path.exists():
        raise DataError(f"{meta_path} not found")
    meta = json.loads(meta_path.read_text())
    vocab = Vocab.from_dict(meta["vocab"])
    loaded = read_inter([panel_dir / f"{meta['name']}.inter"], vocab)
    # keep quarters that carry no baskets
    panel = PanelDataset(vocab, meta["quarters"],
                         {q: loaded.weights(q) for q in loaded.quarters})
    if panel.fingerprint() != meta["fingerprint"]:
        raise DataError(f"{panel_dir}: panel fingerprint mismatch")
    return panel
