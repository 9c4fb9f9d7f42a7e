"""Seeded synthetic return panels for tests and demos."""

from __future__ import annotations

import numpy as np
import pandas as pd

from .data import ReturnPanel


def business_days(start: str, n_months: int) -> pd.DatetimeIndex:
    """Weekdays from ``start`` spanning ``n_months`` whole calendar months."""
    first = pd.Timestamp(start).to_period("M").to_timestamp()
    last = (first + pd.DateOffset(months=n_months)) - pd.Timedelta(days=1)
    return pd.bdate_range(first, last)


def gaussian_panel(n_assets: int = 4, n_months: int = 30, start: str = "2000-01-01",
                   mean: float = 0.0004, vol: float = 0.01, rf: float = 0.0001,
                   seed: int = 0) -> ReturnPanel:
    """I.i.d. Gaussian daily returns with a correlated factor."""
    rng = np.random.default_rng(seed)
    dates = business_days(start, n_months)
    n = len(dates)
    market = rng.normal(0.0, vol, size=(n, 1))
    idio = rng.normal(0.0, vol, size=(n, n_assets))
    drift = mean * (1.0 + 0.5 * np.arange(n_assets) / max(n_assets - 1, 1))
    returns = drift + 0.6 * market + 0.8 * idio
    tickers = tuple(f"A{i}" for i in range(n_assets))
    return ReturnPanel(dates.values.astype("datetime64[D]"), tickers, returns, np.full(n, rf))


def regime_switching_panel(n_assets: int = 6, n_years: int = 12, start: str = "2000-01-01",
                           stay: float = 0.85, mean: float = 0.0015, vol: float = 0.01,
                           bear_vol_ratio: float = 1.0, rf: float = 0.0001, seed: int = 7):
    """Two Gaussian regimes with sign-opposed means, switching monthly.

    The regime follows a two-state Markov chain with persistence ``stay``.
    In regime 0 asset means are ``+mean * loadings``; in regime 1 they are
    ``-mean * loadings`` and shocks are scaled by ``bear_vol_ratio``.
    Returns ``(panel, regimes)`` with one regime per month.
    """
    rng = np.random.default_rng(seed)
    n_months = 12 * n_years
    regimes = np.empty(n_months, dtype=int)
    regimes[0] = 0
    for t in range(1, n_months):
        regimes[t] = regimes[t - 1] if rng.uniform() < stay else 1 - regimes[t - 1]
    loadings = np.linspace(1.5, -0.5, n_assets)
    dates = business_days(start, n_months)
    month_of_day = (dates.year - dates[0].year) * 12 + dates.month - dates[0].month
    sign = np.where(regimes[month_of_day] == 0, 1.0, -1.0)
    market = rng.normal(0.0, vol, size=(len(dates), 1))
    idio = rng.normal(0.0, vol, size=(len(dates), n_assets))
    scale = np.where(sign > 0, 1.0, bear_vol_ratio)[:, None]
    returns = sign[:, None] * mean * loadings + scale * (0.5 * market + 0.8 * idio)
    tickers = tuple(f"A{i}" for i in range(n_assets))
    panel = ReturnPanel(dates.values.astype("datetime64[D]"), tickers, returns, np.full(len(dates), rf))
    return panel, regimes
