import numpy as np
import pandas as pd
import pytest

from markov_markowitz.synthetic import gaussian_panel


def write_price_csv(path, panel, extra=None, date_format="%Y-%m-%d"):
    """Write a wide price file whose simple returns reproduce ``panel``.

    ``extra`` maps additional ticker names to daily return arrays (e.g. an
    index benchmark). One price row is prepended before the first return.
    """
    rets = panel.returns
    names = list(panel.tickers)
    if extra:
        rets = np.column_stack([rets, *extra.values()])
        names += list(extra)
    prices = 100.0 * np.cumprod(np.vstack([np.ones(rets.shape[1]), 1.0 + rets]), axis=0)
    first = pd.Timestamp(panel.dates[0]) - pd.offsets.BDay(1)
    dates = pd.DatetimeIndex([first]).append(pd.DatetimeIndex(panel.dates))
    frame = pd.DataFrame(prices, columns=names)
    frame.insert(0, "date", dates.strftime(date_format))
    frame.to_csv(path, index=False)
    return path


def write_rf_csv(path, dates, value=0.01):
    """Fama-French style daily rates in percent."""
    idx = pd.DatetimeIndex(dates)
    pd.DataFrame({"date": idx.strftime("%Y%m%d"), "rf": value}).to_csv(path, index=False)
    return path


@pytest.fixture
def small_panel():
    return gaussian_panel(n_assets=3, n_months=30, seed=11)


@pytest.fixture
def price_files(tmp_path):
    panel = gaussian_panel(n_assets=4, n_months=30, seed=5)
    rng = np.random.default_rng(99)
    index = rng.normal(0.0003, 0.009, size=len(panel))
    prices = write_price_csv(tmp_path / "prices.csv", panel, {"SPY": index})
    first = pd.Timestamp(panel.dates[0]) - pd.offsets.BDay(5)
    rf_dates = pd.bdate_range(first, pd.Timestamp(panel.dates[-1]))
    rf = write_rf_csv(tmp_path / "rf.csv", rf_dates)
    return {"prices": prices, "rf": rf, "panel": panel, "dir": tmp_path}


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, line = RESULTS[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {line}")
