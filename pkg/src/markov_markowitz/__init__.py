"""Regime-aware mean-variance allocation.

Months are described by their efficient-frontier coefficients, clustered
into market states with dynamic time warping, and the next month's book is
a blend of per-state tangency portfolios weighted by the estimated state
transition probabilities.
"""

from .allocation import (
    PortfolioWeights,
    StateWeightMatrix,
    markov_markowitz_weights,
    partition_returns_by_state,
    state_weight_matrix,
    tangency_portfolio,
)
from .backtest import BacktestConfig, BacktestResult, run_online_backtest, simulate_holding
from .data import (
    PricePanel,
    ReturnPanel,
    compute_returns,
    group_by_month,
    load_price_panel,
    load_recession_labels,
    load_risk_free,
)
from .estimator import MarkovMarkowitz
from .frontier import (
    EfCoefficients,
    EfficientFrontierCoefficients,
    frontier_coefficients,
    monthly_coefficients,
    sample_mean_cov,
)
from .markov import estimate_transition_matrix, steady_state, transition_row
from .metrics import alpha_regression, compute_metrics, max_drawdown, sharpe_ratio, vol_target
from .regime import (
    DTWHierarchicalClustering,
    coefficient_correlation_distance,
    dtw_distance,
    dtw_distance_matrix,
    hierarchical_cluster,
)

__version__ = "0.1.0"

__all__ = [
    "BacktestConfig",
    "BacktestResult",
    "DTWHierarchicalClustering",
    "EfCoefficients",
    "EfficientFrontierCoefficients",
    "MarkovMarkowitz",
    "PortfolioWeights",
    "PricePanel",
    "ReturnPanel",
    "StateWeightMatrix",
    "alpha_regression",
    "coefficient_correlation_distance",
    "compute_metrics",
    "compute_returns",
    "dtw_distance",
    "dtw_distance_matrix",
    "estimate_transition_matrix",
    "frontier_coefficients",
    "group_by_month",
    "hierarchical_cluster",
    "load_price_panel",
    "load_recession_labels",
    "load_risk_free",
    "markov_markowitz_weights",
    "max_drawdown",
    "monthly_coefficients",
    "partition_returns_by_state",
    "run_online_backtest",
    "sample_mean_cov",
    "sharpe_ratio",
    "simulate_holding",
    "state_weight_matrix",
    "steady_state",
    "tangency_portfolio",
    "transition_row",
    "vol_target",
]
