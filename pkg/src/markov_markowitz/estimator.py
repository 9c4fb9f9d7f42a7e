"""The Markov-Markowitz allocator as a scikit-learn style estimator."""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .allocation import (
    DEFAULT_GROSS_CAP,
    markov_markowitz_weights,
    partition_returns_by_state,
    state_weight_matrix,
)
from .data import group_by_month
from .frontier import DEFAULT_RIDGE, monthly_coefficients
from .markov import estimate_transition_matrix, steady_state, transition_row
from .regime import DTWHierarchicalClustering
from .validation import as_return_panel

RF_AGGREGATIONS = ("mean", "median", "last")


def aggregate_rf(rf: np.ndarray, how: str = "mean") -> float:
    """Collapse a daily risk-free series into the scalar tangency hurdle."""
    if how == "mean":
        return float(np.mean(rf))
    if how == "median":
        return float(np.median(rf))
    if how == "last":
        return float(rf[-1])
    raise ValueError(f"rf aggregation must be one of {RF_AGGREGATIONS}, got {how!r}")


class MarkovMarkowitz(BaseEstimator):
    """Allocate by blending per-state tangency books with transition probabilities.

    ``fit`` takes daily simple returns (a :class:`ReturnPanel` or a
    DatetimeIndex-ed DataFrame) covering whole training months. It builds
    monthly frontier coefficients, clusters months into ``n_clusters``
    states, estimates the state transition matrix, solves one tangency book
    per state and blends them with the transition row of the last training
    month's state. ``predict`` returns the blended weights for the month
    after the training window.

    Parameters
    ----------
    n_clusters : int, default 4
    gross_cap : float, default 1.5
        Cap on ``sum(|w|)`` for every state book.
    ridge : float, default 1e-10
    linkage : {"average", "single", "complete"}, default "average"
    standardize : bool, default True
    window : int or None
        DTW band half-width.
    pseudo_count : float, default 0
        Added to every transition count.
    rf_aggregation : {"mean", "median", "last"}, default "mean"
    subtract_rf_zero_budget : bool, default True
    seed : int, default 0
        Seeds the multi-start search used when no positive-excess book exists.
    """

    def __init__(self, n_clusters=4, gross_cap=DEFAULT_GROSS_CAP, ridge=DEFAULT_RIDGE,
                 linkage="average", standardize=True, window=None, pseudo_count=0.0,
                 rf_aggregation="mean", subtract_rf_zero_budget=True, seed=0):
        self.n_clusters = n_clusters
        self.gross_cap = gross_cap
        self.ridge = ridge
        self.linkage = linkage
        self.standardize = standardize
        self.window = window
        self.pseudo_count = pseudo_count
        self.rf_aggregation = rf_aggregation
        self.subtract_rf_zero_budget = subtract_rf_zero_budget
        self.seed = seed

    def fit(self, X, y=None, rf=None):
        panel = as_return_panel(X, rf)
        slices = group_by_month(panel)
        coefficients = monthly_coefficients(slices, self.ridge)
        clusterer = DTWHierarchicalClustering(
            n_clusters=self.n_clusters, linkage=self.linkage,
            standardize=self.standardize, window=self.window,
        ).fit(coefficients)
        labels = clusterer.labels_
        P = estimate_transition_matrix(labels, self.n_clusters, self.pseudo_count)
        current = int(labels[-1])
        row = transition_row(P, current)
        parts = partition_returns_by_state(slices, labels, self.n_clusters)
        self.rf_ = aggregate_rf(panel.rf, self.rf_aggregation)
        states = state_weight_matrix(parts, self.rf_, self.gross_cap, self.ridge,
                                     self.subtract_rf_zero_budget, self.seed)

        self.tickers_ = panel.tickers
        self.n_features_in_ = panel.n_assets
        self.months_ = list(slices.months)
        self.coefficients_ = coefficients
        self.clusterer_ = clusterer
        self.labels_ = labels
        self.transition_matrix_ = P
        self.current_state_ = current
        self.transition_row_ = row
        self.state_weights_ = states
        self.weights_ = markov_markowitz_weights(states, row)
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError("MarkovMarkowitz is not fitted yet; call fit first")

    def predict(self, X=None) -> pd.Series:
        """Weights to hold over the month following the training data."""
        self._check_fitted()
        return pd.Series(self.weights_, index=list(self.tickers_), name="weight")

    def steady_state(self) -> np.ndarray:
        self._check_fitted()
        return steady_state(self.transition_matrix_)

    def state_weight_frame(self) -> pd.DataFrame:
        self._check_fitted()
        sw = self.state_weights_
        frame = pd.DataFrame(sw.W, columns=list(self.tickers_), index=pd.RangeIndex(1, sw.K + 1, name="state"))
        frame.insert(0, "sharpe", sw.sharpes)
        frame.insert(0, "budget", sw.budgets)
        return frame
