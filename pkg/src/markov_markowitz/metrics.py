"""Performance statistics on daily return series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .exceptions import DegenerateSeriesError

TRADING_DAYS = 252


def _as_1d(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _excess(returns, rf) -> np.ndarray:
    r = _as_1d(returns, "returns")
    rf = np.broadcast_to(_as_1d(rf, "rf") if np.ndim(rf) else float(rf), r.shape)
    return r - rf


def sharpe_ratio(returns, rf=0.0, periods: int = TRADING_DAYS) -> float:
    """Annualised ``mean(r - rf) / std(r - rf)`` with the sample stdev."""
    ex = _excess(returns, rf)
    if ex.size < 2:
        raise ValueError("need at least 2 observations")
    if np.ptp(ex) == 0:
        raise DegenerateSeriesError("excess returns have zero variance; Sharpe is undefined")
    return float(ex.mean() / ex.std(ddof=1) * np.sqrt(periods))


def annualized_return(returns, periods: int = TRADING_DAYS) -> float:
    r = _as_1d(returns, "returns")
    if r.size == 0:
        raise ValueError("empty return series")
    growth = np.prod(1.0 + r)
    return float(growth ** (periods / r.size) - 1.0)


def wealth_curve(returns, start: float = 1.0) -> np.ndarray:
    """Compounded wealth, ``wealth[0] = start`` and one point per return."""
    r = _as_1d(returns, "returns")
    return start * np.cumprod(np.r_[1.0, 1.0 + r])


def max_drawdown(wealth) -> float:
    """``min_t wealth[t] / max_{s<=t} wealth[s] - 1`` (a value in [-1, 0])."""
    w = _as_1d(wealth, "wealth")
    if w.size == 0:
        raise ValueError("empty wealth curve")
    peak = np.maximum.accumulate(w)
    return float(np.min(w / peak - 1.0))


def compute_metrics(returns, rf=0.0, periods: int = TRADING_DAYS) -> tuple[float, float, float]:
    """``(sharpe, annualized_return, max_drawdown)`` of a daily series."""
    r = _as_1d(returns, "returns")
    if r.size < 2:
        raise ValueError("need at least 2 observations")
    return sharpe_ratio(r, rf, periods), annualized_return(r, periods), max_drawdown(wealth_curve(r))


@dataclass(frozen=True)
class AlphaResult:
    alpha: float
    p_value: float
    beta: float
    alpha_daily: float
    t_stat: float
    n_obs: int

    def to_dict(self) -> dict:
        return {
            "annualized_alpha": self.alpha,
            "p_value": self.p_value,
            "beta": self.beta,
            "t_stat": self.t_stat,
            "n_obs": self.n_obs,
        }


def alpha_regression(strategy, benchmark, rf=0.0, periods: int = TRADING_DAYS) -> AlphaResult:
    """Jensen's alpha: OLS of strategy excess on benchmark excess with intercept.

    The p-value is the two-sided t-test on the intercept with ``N - 2``
    degrees of freedom (plain OLS errors).
    """
    y = _excess(strategy, rf)
    x = _excess(benchmark, rf)
    if y.size != x.size:
        raise ValueError("strategy and benchmark must have equal length")
    n = y.size
    if n < 30:
        raise ValueError(f"need at least 30 observations, got {n}")
    if np.ptp(x) == 0:
        raise DegenerateSeriesError("benchmark excess returns have zero variance")
    X = np.column_stack([np.ones(n), x])
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = n - 2
    sigma2 = float(resid @ resid) / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(sigma2 * xtx_inv[0, 0])
    if se > 0:
        t = float(coef[0] / se)
        p = float(2.0 * stats.t.sf(abs(t), dof))
    else:
        # exact fit: any non-zero intercept is certain
        t = float("inf") if coef[0] != 0 else 0.0
        p = 0.0 if coef[0] != 0 else 1.0
    return AlphaResult(float(periods * coef[0]), p, float(coef[1]), float(coef[0]), t, n)


def vol_target(benchmark, target, ddof: int = 1) -> tuple[np.ndarray, float]:
    """Scale ``benchmark`` so its sample stdev equals that of ``target``.

    Returns ``(scaled, k)``.
    """
    b = _as_1d(benchmark, "benchmark")
    t = _as_1d(target, "target")
    if np.ptp(b) == 0:
        raise DegenerateSeriesError("benchmark has zero volatility; cannot volatility-target")
    k = float(t.std(ddof=ddof) / b.std(ddof=ddof))
    return k * b, k
