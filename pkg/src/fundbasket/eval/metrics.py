"""Top-K ranking and the Recall@K / NDCG@K metrics."""
from __future__ import annotations

from typing import Iterable, Optional

import numpy as np


def rank_topk(scores, k: int, candidates: Optional[np.ndarray] = None) -> np.ndarray:
    """Indices of the ``k`` best-scoring candidates.

    Higher scores first, equal scores by ascending item index. Returns every
    candidate when there are fewer than ``k``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    idx = np.arange(len(scores)) if candidates is None else np.flatnonzero(candidates)
    order = np.argsort(-scores[idx], kind="stable")
    return idx[order[:k]]


def recall_at_k(predicted: Iterable[int], target) -> float:
    target = set(int(t) for t in target)
    if not target:
        raise ValueError("recall is undefined for an empty target set")
    hits = sum(1 for p in predicted if int(p) in target)
    return hits / len(target)


def _discounts(n: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, n + 2))


def ndcg_at_k(predicted, target, k: Optional[int] = None) -> float:
    target = set(int(t) for t in target)
    if not target:
        raise ValueError("NDCG is undefined for an empty target set")
    predicted = list(predicted)
    if k is None:
        k = len(predicted)
    predicted = predicted[:k]
    hits = np.array([int(p) in target for p in predicted], dtype=bool)
    # both sums run over discount arrays in rank order, so a perfect ranking gives exactly 1
    dcg = float(_discounts(len(predicted))[hits].sum())
    idcg = float(_discounts(min(k, len(target))).sum())
    return dcg / idcg

