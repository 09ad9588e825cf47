"""Heuristic baselines: last allocation, popularity, explore popularity, random."""
from __future__ import annotations

import numpy as np

from ..dataset import DEFAULT_REPEAT_WINDOW, explore_mask
from ..validation import check_panel
from .base import BaseScorer


class LastAllocation(BaseScorer):
    """Repeat the fund's most recent portfolio, ranked by allocation weight.

    Held items score ``weight + 1`` so they always outrank items not held,
    which score 0.
    """

    def _fit(self, X):
        panel = check_panel(X)
        self.n_funds_, self.n_items_ = panel.shape
        self.last_quarter_ = panel.quarters[-1]
        self.weights_ = panel.weights(self.last_quarter_)

    def _scores(self, funds):
        rows = self.weights_[funds].toarray()
        return np.where(rows > 0, rows + 1.0, 0.0)


class GlobalPopularity(BaseScorer):
    """Number of distinct funds holding each item in the last history quarter."""

    def _fit(self, X):
        panel = check_panel(X)
        self.n_funds_, self.n_items_ = panel.shape
        self.counts_ = np.asarray(panel.incidence(panel.quarters[-1]).sum(axis=0)).ravel()

    def _scores(self, funds):
        return np.tile(self.counts_, (len(funds), 1))


class ExplorePopularity(BaseScorer):
    """Number of funds that newly added each item in the last history quarter.

    An addition is novel when the fund did not hold the item in any of the
    ``window`` preceding quarters.
    """

    def __init__(self, window: int = DEFAULT_REPEAT_WINDOW):
        self.window = window

    def _fit(self, X):
        panel = check_panel(X, min_quarters=2)
        self.n_funds_, self.n_items_ = panel.shape
        last = panel.quarters[-1]
        held = panel.incidence(last)
        repeat = explore_mask(panel, last, self.window).repeat
        novel = held - held.multiply(repeat)
        self.counts_ = np.asarray(novel.sum(axis=0)).ravel()

    def _scores(self, funds):
        return np.tile(self.counts_, (len(funds), 1))


class RandomScorer(BaseScorer):
    """Uniform random scores, reproducible per (seed, fund)."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _fit(self, X):
        panel = check_panel(X)
        self.n_funds_, self.n_items_ = panel.shape

    def _scores(self, funds):
        out = np.empty((len(funds), self.n_items_))
        for row, u in enumerate(funds):
            out[row] = np.random.default_rng([self.seed, int(u)]).random(self.n_items_)
        return out
