"""Recommender registry and fitted-state persistence."""
from __future__ import annotations

import hashlib
import io
import pickle
from pathlib import Path

from ..exceptions import ModelError
from .base import BaseScorer
from .heuristics import ExplorePopularity, GlobalPopularity, LastAllocation, RandomScorer
from .neighbors import EASE, TIFUKNN, ItemKNN

REGISTRY = {
    "last_alloc": LastAllocation,
    "pop": GlobalPopularity,
    "explore_pop": ExplorePopularity,
    "random": RandomScorer,
    "itemknn": ItemKNN,
    "ease": EASE,
    "tifuknn": TIFUKNN,
}

DISPLAY_NAMES = {
    "last_alloc": "Last Alloc.",
    "pop": "Popularity",
    "explore_pop": "Expl. Pop.",
    "random": "Random",
    "itemknn": "ItemKNN",
    "ease": "EASE",
    "tifuknn": "TIFUKNN",
}

FORMAT_VERSION = 1
_MAGIC = b"FUNDBASKET-MODEL\n"


def make_model(name: str, **params) -> BaseScorer:
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; available: {', '.join(REGISTRY)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ModelError(f"bad hyperparameters for {name}: {exc}") from exc


def save_model(model: BaseScorer, path) -> Path:
    """Write a versioned blob holding hyperparameters, data hash and fitted state."""
    name = next((k for k, v in REGISTRY.items() if type(model) is v), None)
    if name is None:
        raise ModelError(f"{type(model).__name__} is not a registered model")
    payload = {
        "format_version": FORMAT_VERSION,
        "model": name,
        "params": model.get_params(),
        "data_hash": getattr(model, "data_hash_", None),
        "state": {k: v for k, v in vars(model).items() if k.endswith("_")},
    }
    body = pickle.dumps(payload, protocol=pickle.HIGHEST_PROTOCOL)
    path = Path(path)
    path.write_bytes(_MAGIC + hashlib.sha256(body).hexdigest().encode() + b"\n" + body)
    return path


def load_model(path, expected_data_hash: str | None = None) -> BaseScorer:
    raw = Path(path).read_bytes()
    if not raw.startswith(_MAGIC):
        raise ModelError(f"{path} is not a saved model")
    stream = io.BytesIO(raw[len(_MAGIC):])
    digest = stream.readline().strip().decode()
    body = stream.read()
    if hashlib.sha256(body).hexdigest() != digest:
        raise ModelError(f"{path}: checksum mismatch")
    payload = pickle.loads(body)
    if payload.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"{path}: unsupported format version {payload.get('format_version')}")
    if expected_data_hash is not None and payload["data_hash"] != expected_data_hash:
        raise ModelError(f"{path}: fitted on different data")
    model = make_model(payload["model"], **payload["params"])
    for k, v in payload["state"].items():
        setattr(model, k, v)
    return model


__all__ = [
    "BaseScorer", "LastAllocation", "GlobalPopularity", "ExplorePopularity", "RandomScorer",
    "ItemKNN", "EASE", "TIFUKNN", "REGISTRY", "DISPLAY_NAMES", "make_model", "save_model", "load_model",
]
