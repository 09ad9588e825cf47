"""Input validation helpers shared by the estimators."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.utils import check_array

from .dataset import PanelDataset, interaction_matrix
from .exceptions import DataError


def check_panel(X, min_quarters: int = 1) -> PanelDataset:
    if not isinstance(X, PanelDataset):
        raise TypeError(f"expected a PanelDataset, got {type(X).__name__}")
    if len(X.quarters) < min_quarters:
        raise DataError(f"panel needs at least {min_quarters} quarter(s), has {len(X.quarters)}")
    return X


def check_interactions(X) -> sp.csr_matrix:
    """Binary CSR fund x item matrix from a panel (all quarters OR-ed) or an array-like."""
    if isinstance(X, PanelDataset):
        return interaction_matrix(X, X.quarters)
    X = check_array(X, accept_sparse="csr", dtype=np.float64)
    X = sp.csr_matrix(X, copy=True)
    X.eliminate_zeros()
    X.data[:] = 1.0
    return X


def check_funds(funds, n_funds: int) -> np.ndarray:
    if funds is None:
        return np.arange(n_funds)
    funds = np.atleast_1d(np.asarray(funds))
    if funds.dtype.kind not in "iu":
        raise TypeError("fund indices must be integers")
    if funds.size and (funds.min() < 0 or funds.max() >= n_funds):
        raise IndexError(f"fund index out of range [0, {n_funds})")
    return funds.astype(np.int64)
