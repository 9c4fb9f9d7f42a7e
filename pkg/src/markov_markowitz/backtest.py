"""Online expanding backtest of the Markov-Markowitz allocator.

Each test month is decided from every month before it, held with daily
rebalancing back to target, charged proportional fees on traded notional,
and then appended to the training window.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
import pandas as pd

from .allocation import DEFAULT_GROSS_CAP, tangency_portfolio
from .data import MonthlySlices, ReturnPanel, format_month, group_by_month
from .estimator import RF_AGGREGATIONS, MarkovMarkowitz, aggregate_rf
from .exceptions import BacktestError, DimensionalityWarning, MarkovMarkowitzError
from .frontier import DEFAULT_RIDGE, sample_mean_cov
from .metrics import alpha_regression, compute_metrics, vol_target, wealth_curve
from .regime import LINKAGES

logger = logging.getLogger(__name__)

STRATEGY = "markov_markowitz"
BUILTIN_BENCHMARKS = ("tangency", "equal_weight")
MIN_TRAIN_MONTHS = 24


@dataclass
class BacktestConfig:
    """Resolved settings of one backtest run.

    ``test_start`` is the first month traded, as ``(year, month)``.
    ``benchmarks`` lists ``"tangency"``, ``"equal_weight"`` and/or column
    names of extra buy-and-hold return series.
    """

    test_start: tuple[int, int]
    n_clusters: int = 4
    gross_cap: float = DEFAULT_GROSS_CAP
    fee_rate: float = 0.01
    ridge: float = DEFAULT_RIDGE
    standardize: bool = True
    linkage: str = "average"
    window: int | None = None
    rf_aggregation: str = "mean"
    seed: int = 0
    benchmarks: tuple[str, ...] = BUILTIN_BENCHMARKS
    min_train_months: int = MIN_TRAIN_MONTHS
    pseudo_count: float = 0.0
    subtract_rf_zero_budget: bool = True
    charge_drift: bool = True
    initial_position: str = "warm"

    def __post_init__(self):
        self.test_start = tuple(int(v) for v in self.test_start)
        self.benchmarks = tuple(self.benchmarks)
        if len(self.test_start) != 2 or not 1 <= self.test_start[1] <= 12:
            raise ValueError(f"test_start must be (year, month), got {self.test_start!r}")
        if self.n_clusters < 2:
            raise ValueError("n_clusters must be at least 2")
        if self.fee_rate < 0:
            raise ValueError("fee_rate must be non-negative")
        if not self.gross_cap >= 1:
            raise ValueError("gross_cap must be at least 1 to hold a fully invested book")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if self.linkage not in LINKAGES:
            raise ValueError(f"linkage must be one of {LINKAGES}")
        if self.rf_aggregation not in RF_AGGREGATIONS:
            raise ValueError(f"rf_aggregation must be one of {RF_AGGREGATIONS}")
        if self.min_train_months < 24:
            raise ValueError("min_train_months must be at least 24")
        if self.initial_position not in ("warm", "cash"):
            raise ValueError("initial_position must be 'warm' or 'cash'")

    def estimator_params(self) -> dict:
        return {
            "n_clusters": self.n_clusters,
            "gross_cap": self.gross_cap,
            "ridge": self.ridge,
            "linkage": self.linkage,
            "standardize": self.standardize,
            "window": self.window,
            "pseudo_count": self.pseudo_count,
            "rf_aggregation": self.rf_aggregation,
            "subtract_rf_zero_budget": self.subtract_rf_zero_budget,
            "seed": self.seed,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["test_start"] = format_month(self.test_start)
        d["benchmarks"] = list(self.benchmarks)
        return d


@dataclass(frozen=True)
class HoldingResult:
    gross: np.ndarray
    net: np.ndarray
    turnover: np.ndarray
    end_weights: np.ndarray


def simulate_holding(returns, w_target, fee_rate: float, prior_weights=None,
                     charge_drift: bool = True) -> HoldingResult:
    """Hold ``w_target`` through one month of daily returns.

    Each day the book earns ``w_target . r``. Weights then drift to
    ``w_i (1 + r_i) / (1 + w . r)`` (the cash leg absorbs the rest) and are
    traded back to target at that day's close, except on the last day where
    the drifted book is handed to the next month. Day one also pays for the
    move from ``prior_weights``. Fees are ``fee_rate * turnover`` and come off
    the same day's return.
    """
    R = np.atleast_2d(np.asarray(returns, dtype=float))
    w = np.asarray(w_target, dtype=float)
    if R.shape[1] != w.size:
        raise ValueError(f"weights have {w.size} entries for {R.shape[1]} assets")
    if fee_rate < 0:
        raise ValueError("fee_rate must be non-negative")
    prior = np.zeros_like(w) if prior_weights is None else np.asarray(prior_weights, dtype=float)
    gross = R @ w
    growth = 1.0 + gross
    if np.any(growth <= 0):
        raise MarkovMarkowitzError("portfolio value hit zero during the month")
    drifted = w * (1.0 + R) / growth[:, None]
    turnover = np.zeros(R.shape[0])
    turnover[0] = np.abs(w - prior).sum()
    if charge_drift and R.shape[0] > 1:
        turnover[:-1] += np.abs(w - drifted[:-1]).sum(axis=1)
    net = gross - fee_rate * turnover
    return HoldingResult(gross, net, turnover, drifted[-1].copy())


@dataclass
class IterationRecord:
    """What was known and decided for one test month."""

    month: tuple[int, int]
    weights: np.ndarray
    labels: np.ndarray | None = None
    transition_matrix: np.ndarray | None = None
    current_state: int | None = None
    state_weights: object = None


@dataclass
class WalkForward:
    dates: np.ndarray
    gross: np.ndarray
    net: np.ndarray
    turnover: np.ndarray
    records: list[IterationRecord] = field(default_factory=list)

    def weights_frame(self, tickers) -> pd.DataFrame:
        idx = pd.PeriodIndex([pd.Period(year=y, month=m, freq="M") for y, m in (r.month for r in self.records)],
                             name="month")
        return pd.DataFrame(np.array([r.weights for r in self.records]), index=idx, columns=list(tickers))


def resolve_test_start(slices: MonthlySlices, cfg: BacktestConfig) -> int:
    start = tuple(cfg.test_start)
    if start not in slices.months:
        later = [i for i, m in enumerate(slices.months) if m >= start]
        if not later:
            raise ValueError(f"test_start {format_month(start)} is after the last month of data")
        i0 = later[0]
    else:
        i0 = slices.index(start)
    if i0 < cfg.min_train_months:
        raise ValueError(
            f"test_start {format_month(start)} leaves {i0} training months; need {cfg.min_train_months}"
        )
    return i0


def _walk_forward(panel: ReturnPanel, cfg: BacktestConfig,
                  decide: Callable[[ReturnPanel], IterationRecord]) -> WalkForward:
    slices = group_by_month(panel)
    i0 = resolve_test_start(slices, cfg)

    def decide_month(i):
        train = panel.head(slices.bounds[i][0])
        try:
            rec = decide(train)
        except (MarkovMarkowitzError, np.linalg.LinAlgError, ValueError) as exc:
            raise BacktestError(f"{format_month(slices.months[i])}: {exc}", month=slices.months[i]) from exc
        rec.month = slices.months[i]
        return rec

    prior = np.zeros(panel.n_assets)
    if cfg.initial_position == "warm" and i0 - 1 >= cfg.min_train_months:
        # start from the book a continuously running model would carry in
        warm = decide_month(i0 - 1)
        prior = simulate_holding(slices.block(i0 - 1), warm.weights, cfg.fee_rate,
                                 charge_drift=cfg.charge_drift).end_weights

    dates, gross, net, turnover, records = [], [], [], [], []
    for i in range(i0, len(slices)):
        rec = decide_month(i)
        held = simulate_holding(slices.block(i), rec.weights, cfg.fee_rate, prior, cfg.charge_drift)
        start, stop = slices.bounds[i]
        dates.append(panel.dates[start:stop])
        gross.append(held.gross)
        net.append(held.net)
        turnover.append(held.turnover)
        records.append(rec)
        prior = held.end_weights
        logger.debug("%s: gross %.4f", format_month(rec.month), np.abs(rec.weights).sum())
    return WalkForward(np.concatenate(dates), np.concatenate(gross), np.concatenate(net),
                       np.concatenate(turnover), records)


def _markov_decider(cfg: BacktestConfig):
    params = cfg.estimator_params()

    def decide(train: ReturnPanel) -> IterationRecord:
        model = MarkovMarkowitz(**params).fit(train)
        return IterationRecord(
            month=None,
            weights=model.weights_,
            labels=model.labels_,
            transition_matrix=model.transition_matrix_,
            current_state=model.current_state_,
            state_weights=model.state_weights_,
        )

    return decide


def _tangency_decider(cfg: BacktestConfig):
    def decide(train: ReturnPanel) -> IterationRecord:
        m = sample_mean_cov(train.returns, cfg.ridge)
        rf = aggregate_rf(train.rf, cfg.rf_aggregation)
        book = tangency_portfolio(m, rf, 1, cfg.gross_cap, cfg.subtract_rf_zero_budget, cfg.seed)
        return IterationRecord(month=None, weights=book.w)

    return decide


def _dimensionality_check(panel: ReturnPanel):
    slices = group_by_month(panel)
    days = np.median([b - a for a, b in slices.bounds])
    if panel.n_assets >= days:
        warnings.warn(
            f"{panel.n_assets} assets vs a median of {days:g} trading days per month; "
            "monthly covariances will be singular or badly estimated",
            DimensionalityWarning, stacklevel=3,
        )


def benchmark_monthly_tangency(panel: ReturnPanel, cfg: BacktestConfig) -> WalkForward:
    """Tangency book on all training data, re-solved monthly, same cap and fees."""
    return _walk_forward(panel, cfg, _tangency_decider(cfg))


def equal_weight_returns(panel: ReturnPanel) -> np.ndarray:
    """Daily-rebalanced equal-weight returns (no fees)."""
    return panel.returns.mean(axis=1)


def benchmark_equal_weight_vol_targeted(panel: ReturnPanel, strategy_returns) -> pd.Series:
    """Equal-weight returns scaled to the strategy's full-window sample stdev.

    ``strategy_returns`` is a date-indexed Series (the panel rows on those
    dates are used) or an array aligned with the panel rows.
    """
    if isinstance(strategy_returns, pd.Series):
        idx = pd.DatetimeIndex(panel.dates)
        pos = idx.get_indexer(strategy_returns.index)
        if np.any(pos < 0):
            raise ValueError("strategy dates are not covered by the panel")
        ew = equal_weight_returns(panel.rows(pos))
        index = strategy_returns.index
        target = strategy_returns.to_numpy(dtype=float)
    else:
        target = np.asarray(strategy_returns, dtype=float)
        if target.size != len(panel):
            raise ValueError("strategy returns must align with the panel rows")
        ew = equal_weight_returns(panel)
        index = pd.DatetimeIndex(panel.dates)
    scaled, _ = vol_target(ew, target)
    return pd.Series(scaled, index=index, name="equal_weight")


@dataclass
class MetricsReport:
    strategies: dict
    alphas: dict
    n_days: int
    start: str
    end: str

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(self.strategies).T


def build_report(returns: pd.DataFrame, rf: np.ndarray, strategy: str = STRATEGY) -> MetricsReport:
    """Sharpe, annualised return and drawdown per column, alphas of ``strategy``."""
    perf = {}
    for name in returns.columns:
        r = returns[name].to_numpy(dtype=float)
        try:
            sharpe, ann, mdd = compute_metrics(r, rf)
        except MarkovMarkowitzError as exc:
            warnings.warn(f"{name}: {exc}", stacklevel=2)
            sharpe, ann, mdd = float("nan"), *compute_metrics(np.r_[r, 0.0], 0.0)[1:]
        perf[name] = {"sharpe": sharpe, "annualized_return": ann, "max_drawdown": mdd}
    alphas = {}
    if strategy in returns.columns:
        y = returns[strategy].to_numpy(dtype=float)
        for name in returns.columns:
            if name == strategy:
                continue
            try:
                alphas[name] = alpha_regression(y, returns[name].to_numpy(dtype=float), rf).to_dict()
            except (MarkovMarkowitzError, ValueError) as exc:
                warnings.warn(f"alpha vs {name}: {exc}", stacklevel=2)
    dates = returns.index
    return MetricsReport(perf, alphas, len(returns),
                         str(pd.Timestamp(dates[0]).date()), str(pd.Timestamp(dates[-1]).date()))


@dataclass
class BacktestResult:
    dates: np.ndarray
    returns: pd.DataFrame
    rf: np.ndarray
    weights: pd.DataFrame
    turnover: np.ndarray
    records: list[IterationRecord]
    metrics: MetricsReport
    config: BacktestConfig
    training_months: list = field(default_factory=list)

    @property
    def wealth(self) -> pd.DataFrame:
        """Wealth after each day; the curve starts from 1.0 before the first day."""
        return pd.DataFrame({c: wealth_curve(self.returns[c].to_numpy())[1:] for c in self.returns.columns},
                            index=self.returns.index)

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]


def run_online_backtest(panel: ReturnPanel, cfg: BacktestConfig,
                        benchmark_returns: pd.DataFrame | None = None) -> BacktestResult:
    """Run the strategy and its configured benchmarks over the test window.

    ``benchmark_returns`` holds extra buy-and-hold daily return columns
    (e.g. an index) on a DatetimeIndex covering the test dates.
    """
    _dimensionality_check(panel)
    strat = _walk_forward(panel, cfg, _markov_decider(cfg))
    index = pd.DatetimeIndex(strat.dates, name="date")
    columns = {STRATEGY: strat.net}
    for name in cfg.benchmarks:
        if name == "tangency":
            columns[name] = benchmark_monthly_tangency(panel, cfg).net
        elif name == "equal_weight":
            columns[name] = benchmark_equal_weight_vol_targeted(
                panel, pd.Series(strat.net, index=index)).to_numpy()
        else:
            if benchmark_returns is None or name not in benchmark_returns.columns:
                raise ValueError(f"no return series for benchmark {name!r}")
            series = benchmark_returns[name].reindex(index)
            if series.isna().any():
                raise ValueError(f"benchmark {name!r} does not cover every test date")
            columns[name] = series.to_numpy(dtype=float)
    returns = pd.DataFrame(columns, index=index)
    pos = pd.DatetimeIndex(panel.dates).get_indexer(index)
    rf = panel.rf[pos]
    report = build_report(returns, rf)
    return BacktestResult(strat.dates, returns, rf, strat.weights_frame(panel.tickers), strat.turnover,
                          strat.records, report, cfg, list(group_by_month(panel).months))
