from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..dataset import PanelDataset
from ..validation import check_funds


class BaseScorer(BaseEstimator):
    """Common surface of every recommender.

    ``fit`` takes the panel restricted to the history quarters. After fitting,
    ``decision_function(funds)`` returns a dense ``(len(funds), n_items)``
    array of real scores, and ``predict(funds, k)`` the top-``k`` item indices.
    Subclasses implement ``_fit`` and ``_scores``.
    """

    def fit(self, X, y=None):
        self._reset()
        if isinstance(X, PanelDataset):
            self.history_quarters_ = tuple(X.quarters)
            self.data_hash_ = X.fingerprint()
        else:
            self.history_quarters_ = ()
            self.data_hash_ = None
        self._fit(X)
        return self

    def _reset(self):
        for name in [k for k in vars(self) if k.endswith("_") and not k.startswith("__")]:
            delattr(self, name)

    def _fit(self, X):
        raise NotImplementedError

    def _scores(self, funds: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decision_function(self, funds=None) -> np.ndarray:
        check_is_fitted(self, "n_items_")
        funds = check_funds(funds, self.n_funds_)
        return np.asarray(self._scores(funds), dtype=np.float64).reshape(len(funds), self.n_items_)

    def score_fund(self, fund: int) -> np.ndarray:
        """Score vector of one fund."""
        return self.decision_function([fund])[0]

    def predict(self, funds=None, k: int = 20) -> np.ndarray:
        """Top-``k`` item indices per fund, ties broken by lower item index."""
        scores = self.decision_function(funds)
        k = min(k, self.n_items_)
        order = np.argsort(-scores, axis=1, kind="stable")
        return order[:, :k]
