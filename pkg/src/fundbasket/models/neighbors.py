"""Neighbourhood and closed-form collaborative filtering models."""
from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ..exceptions import ModelError
from ..validation import check_interactions, check_panel
from .base import BaseScorer

# distances are compared at this resolution so that ties resolve by index
_DIST_DECIMALS = 10


class ItemKNN(BaseScorer):
    """Item-based kNN with shrunk cosine similarity.

    ``sim(i, j) = <x_i, x_j> / (|x_i| |x_j| + shrink)`` over binary item
    columns, self-similarity excluded. Only the ``k`` most similar items are
    kept as neighbours of each item, and a fund's score for item ``i`` sums
    the similarities of its held items that are neighbours of ``i``.
    """

    def __init__(self, k: int = 100, shrink: float = 0.0):
        self.k = k
        self.shrink = shrink

    def _fit(self, X):
        if self.k < 1:
            raise ModelError("ItemKNN needs k >= 1")
        if self.shrink < 0:
            raise ModelError("ItemKNN needs shrink >= 0")
        X = check_interactions(X)
        self.n_funds_, self.n_items_ = X.shape
        self.X_ = X
        self.similarity_ = cosine_similarity(X, self.shrink)
        self.weights_ = top_k_columns(self.similarity_, self.k)

    def _scores(self, funds):
        return np.asarray((self.X_[funds] @ self.weights_).todense())


def cosine_similarity(X: sp.csr_matrix, shrink: float = 0.0) -> np.ndarray:
    """Dense item-item shrunk cosine similarity with a zero diagonal."""
    co = np.asarray((X.T @ X).todense(), dtype=np.float64)
    norms = np.sqrt(np.diag(co))
    denom = np.outer(norms, norms) + shrink
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = np.where(denom > 0, co / denom, 0.0)
    np.fill_diagonal(sim, 0.0)
    return sim


def top_k_columns(sim: np.ndarray, k: int) -> sp.csr_matrix:
    """Keep, in every column, the ``k`` largest entries (lower row index wins ties)."""
    n = sim.shape[0]
    k = min(k, max(n - 1, 0))
    if k == 0:
        return sp.csr_matrix(sim.shape)
    off_diag = sim.copy()
    np.fill_diagonal(off_diag, -np.inf)
    order = np.argsort(-off_diag, axis=0, kind="stable")[:k]
    cols = np.broadcast_to(np.arange(n), order.shape)
    vals = sim[order, cols]
    W = sp.csr_matrix((vals.ravel(), (order.ravel(), cols.ravel())), shape=sim.shape)
    W.eliminate_zeros()
    return W


class EASE(BaseScorer):
    """Embarrassingly shallow autoencoder.

    Closed form: ``P = (X'X + reg_weight * I)^-1``, ``B = -P / diag(P)``
    column-wise with ``diag(B) = 0``; scores are ``X @ B``.
    """

    def __init__(self, reg_weight: float = 250.0):
        self.reg_weight = reg_weight

    def _fit(self, X):
        if not self.reg_weight > 0:
            raise ModelError(f"EASE needs reg_weight > 0, got {self.reg_weight}")
        X = check_interactions(X)
        self.n_funds_, self.n_items_ = X.shape
        self.X_ = X
        self.B_ = ease_weights(X, self.reg_weight)

    def _scores(self, funds):
        return np.asarray(self.X_[funds] @ self.B_)


def ease_weights(X, reg_weight: float) -> np.ndarray:
    gram = np.asarray((X.T @ X).todense(), dtype=np.float64) if sp.issparse(X) else X.T @ X
    gram[np.diag_indices_from(gram)] += reg_weight
    try:
        P = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), np.eye(gram.shape[0]))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ModelError(f"EASE solve failed for reg_weight={reg_weight}: {exc}") from exc
    B = P / (-np.diag(P))
    np.fill_diagonal(B, 0.0)
    if not np.isfinite(B).all():
        raise ModelError(f"EASE produced non-finite weights for reg_weight={reg_weight}")
    return B


def group_sizes(n_baskets: int, n_groups: int) -> list[int]:
    """Sizes of ``n_groups`` contiguous chronological groups, earliest first.

    With fewer baskets than groups every basket is its own group and the
    earliest groups stay empty; otherwise the remainder goes to the latest
    groups.
    """
    if n_baskets <= n_groups:
        return [0] * (n_groups - n_baskets) + [1] * n_baskets
    base, extra = divmod(n_baskets, n_groups)
    return [base] * (n_groups - extra) + [base + 1] * extra


def personal_item_frequency(baskets: list[np.ndarray], n_items: int, n_groups: int,
                            within_decay: float, group_decay: float) -> np.ndarray:
    """Time-decayed item frequency of one fund.

    ``baskets`` are item-index arrays in chronological order. Inside a group,
    the basket ``p`` positions before the group's latest is weighted
    ``within_decay**p`` and the group vector is the mean over its baskets; the
    group ``q`` positions before the latest group is weighted
    ``group_decay**q``. The result is averaged over non-empty groups.
    """
    pif = np.zeros(n_items)
    if not baskets:
        return pif
    sizes = group_sizes(len(baskets), n_groups)
    groups, start = [], 0
    for size in sizes:
        groups.append(baskets[start:start + size])
        start += size
    filled = 0
    for q, group in enumerate(reversed(groups)):
        if not group:
            continue
        filled += 1
        vec = np.zeros(n_items)
        for p, items in enumerate(reversed(group)):
            vec[items] += within_decay ** p
        pif += group_decay ** q * vec / len(group)
    return pif / filled


class TIFUKNN(BaseScorer):
    """Temporal item-frequency user kNN.

    Each fund is summarised by its personal item frequency (PIF) vector. The
    score blends the fund's own PIF with the mean PIF of its ``k`` nearest
    funds: ``alpha * PIF(u) + (1 - alpha) * mean(PIF(neighbours))``.
    """

    def __init__(self, k: int = 300, n_groups: int = 7, within_decay: float = 0.9,
                 group_decay: float = 0.7, alpha: float = 0.7, metric: str = "euclidean"):
        self.k = k
        self.n_groups = n_groups
        self.within_decay = within_decay
        self.group_decay = group_decay
        self.alpha = alpha
        self.metric = metric

    def _fit(self, X):
        if self.k < 1 or self.n_groups < 1:
            raise ModelError("TIFUKNN needs k >= 1 and n_groups >= 1")
        if not 0 <= self.alpha <= 1:
            raise ModelError("TIFUKNN alpha must lie in [0, 1]")
        if self.metric not in ("euclidean", "cosine"):
            raise ModelError(f"unknown TIFUKNN metric {self.metric!r}")
        panel = check_panel(X)
        self.n_funds_, self.n_items_ = panel.shape
        pif = np.zeros(panel.shape)
        has_history = np.zeros(self.n_funds_, dtype=bool)
        for u in range(self.n_funds_):
            baskets = [panel.items_of(u, q) for q in panel.quarters]
            baskets = [b for b in baskets if len(b)]
            has_history[u] = bool(baskets)
            pif[u] = personal_item_frequency(baskets, self.n_items_, self.n_groups,
                                             self.within_decay, self.group_decay)
        self.pif_ = pif
        self.neighbors_ = self._neighbor_matrix(pif, has_history)

    def _neighbor_matrix(self, pif, eligible) -> sp.csr_matrix:
        pool = np.flatnonzero(eligible)
        n = self.n_funds_
        rows, cols, vals = [], [], []
        short = False
        for start in range(0, n, 256):
            block = np.arange(start, min(start + 256, n))
            # squared euclidean ranks like euclidean and avoids sqrt blow-up near 0
            metric = "sqeuclidean" if self.metric == "euclidean" else self.metric
            dist = np.round(pairwise_distances(pif[block], pif[pool], metric), _DIST_DECIMALS)
            for r, u in enumerate(block):
                cand = pool[pool != u]
                d = dist[r][pool != u]
                if len(cand) < self.k:
                    short = True
                chosen = cand[np.lexsort((cand, d))[:self.k]]
                if len(chosen):
                    rows.extend([u] * len(chosen))
                    cols.extend(chosen.tolist())
                    vals.extend([1.0 / len(chosen)] * len(chosen))
        if short:
            warnings.warn(f"fewer than k={self.k} neighbouring funds available; using all", stacklevel=3)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def _scores(self, funds):
        own = self.pif_[funds]
        others = self.neighbors_[funds] @ self.pif_
        return self.alpha * own + (1 - self.alpha) * np.asarray(others)


def pairwise_distances(A: np.ndarray, B: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    if metric in ("euclidean", "sqeuclidean"):
        sq = np.maximum((A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T, 0.0)
        return sq if metric == "sqeuclidean" else np.sqrt(sq)
    na = np.linalg.norm(A, axis=1)[:, None]
    nb = np.linalg.norm(B, axis=1)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where((na > 0) & (nb > 0), (A @ B.T) / (na * nb), 0.0)
    return 1.0 - cos
