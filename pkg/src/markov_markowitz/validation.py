"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np
import pandas as pd

from .data import ReturnPanel


def as_return_panel(X, rf=None) -> ReturnPanel:
    """Coerce ``X`` to a :class:`ReturnPanel`.

    ``X`` may already be a panel (``rf`` then overrides its rate when given)
    or a DataFrame of daily simple returns with a DatetimeIndex.
    """
    if isinstance(X, ReturnPanel):
        if rf is None:
            return X
        return ReturnPanel.from_frame(X.to_frame(), rf)
    if isinstance(X, pd.DataFrame):
        return ReturnPanel.from_frame(X, rf)
    raise TypeError(
        f"expected a ReturnPanel or a DatetimeIndex-ed DataFrame of returns, got {type(X).__name__}"
    )


def check_labels(labels, n_clusters: int | None = None) -> np.ndarray:
    """1-based integer state labels as an int array."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError("labels must be integers")
        arr = arr.astype(int)
    arr = arr.astype(int)
    if arr.size and arr.min() < 1:
        raise ValueError("labels are 1-based state ids")
    if n_clusters is not None and arr.size and arr.max() > n_clusters:
        raise ValueError(f"label {arr.max()} exceeds n_clusters={n_clusters}")
    return arr


def check_probability_vector(p, atol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("probability vector must be one-dimensional")
    if np.any(p < -atol) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must be non-negative and sum to 1")
    return p


def check_stochastic(P, atol: float = 1e-10) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < -atol) or not np.allclose(P.sum(axis=1), 1.0, atol=atol, rtol=0):
        raise ValueError("transition matrix rows must be non-negative and sum to 1")
    return P
