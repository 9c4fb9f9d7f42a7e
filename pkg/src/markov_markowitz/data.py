"""Loading and aligning price, risk-free and recession files.

Price files are wide CSV (``date,<ticker1>,<ticker2>,...``) of adjusted
closes. Risk-free files follow the Fama-French daily convention: ``date,rf``
with rf quoted in percent per day. Recession files hold ``date,indicator``
with one row per month.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import pandas as pd

from .exceptions import (
    CoverageError,
    DataParseError,
    DataValidationError,
    DegenerateMonthError,
)

logger = logging.getLogger(__name__)

Month = tuple[int, int]


def _parse_date(text: str) -> date:
    text = text.strip()
    if len(text) == 8 and text.isdigit():
        # Fama-French files use YYYYMMDD
        return date(int(text[:4]), int(text[4:6]), int(text[6:]))
    return date.fromisoformat(text[:10])


def month_key(d) -> Month:
    d = pd.Timestamp(d)
    return (d.year, d.month)


def format_month(month: Month) -> str:
    return f"{month[0]:04d}-{month[1]:02d}"


def parse_month(text: str) -> Month:
    """Parse ``YYYY-MM`` into a ``(year, month)`` key."""
    try:
        year, mon = text.strip().split("-")[:2]
        key = (int(year), int(mon))
    except ValueError:
        raise ValueError(f"expected YYYY-MM, got {text!r}") from None
    if not 1 <= key[1] <= 12:
        raise ValueError(f"month out of range in {text!r}")
    return key


@dataclass(frozen=True)
class PricePanel:
    """Date-aligned positive prices, one column per ticker."""

    dates: np.ndarray
    tickers: tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        if self.prices.shape != (len(self.dates), len(self.tickers)):
            raise DataValidationError("prices shape does not match dates x tickers")
        if len(self.dates) > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise DataValidationError("dates must be strictly increasing")
        if np.any(~(self.prices > 0)):
            raise DataValidationError("all prices must be positive")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.prices, index=pd.DatetimeIndex(self.dates, name="date"),
                            columns=list(self.tickers))


@dataclass(frozen=True)
class ReturnPanel:
    """Simple daily returns with a matching daily risk-free rate.

    ``returns[t, a]`` is the return of ticker ``a`` earned over the day ending
    on ``dates[t]``; ``rf[t]`` is the decimal daily risk-free rate on that day.
    """

    dates: np.ndarray
    tickers: tuple[str, ...]
    returns: np.ndarray
    rf: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        if self.returns.shape != (n, len(self.tickers)):
            raise DataValidationError("returns shape does not match dates x tickers")
        if self.rf.shape != (n,):
            raise DataValidationError("rf must hold exactly one value per date")
        if n > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise DataValidationError("dates must be strictly increasing")
        if not np.all(np.isfinite(self.returns)) or not np.all(np.isfinite(self.rf)):
            raise DataValidationError("returns and rf must be finite")
        if np.any(self.returns <= -1.0):
            raise DataValidationError("every simple return must exceed -1")

    @property
    def n_assets(self) -> int:
        return len(self.tickers)

    def __len__(self) -> int:
        return len(self.dates)

    def head(self, stop: int) -> "ReturnPanel":
        """First ``stop`` rows."""
        return self.rows(slice(0, stop))

    def rows(self, index) -> "ReturnPanel":
        return ReturnPanel(self.dates[index], self.tickers, self.returns[index], self.rf[index])

    def select(self, tickers: Sequence[str]) -> "ReturnPanel":
        missing = [t for t in tickers if t not in self.tickers]
        if missing:
            raise KeyError(f"unknown tickers: {', '.join(missing)}")
        cols = [self.tickers.index(t) for t in tickers]
        return ReturnPanel(self.dates, tuple(tickers), self.returns[:, cols], self.rf)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.returns, index=pd.DatetimeIndex(self.dates, name="date"),
                            columns=list(self.tickers))

    @classmethod
    def from_frame(cls, returns: pd.DataFrame, rf=None) -> "ReturnPanel":
        """Build a panel from a DatetimeIndex-ed frame of daily simple returns.

        ``rf`` may be a scalar, an array aligned with the rows, or a Series
        that is forward-filled onto the return dates. ``None`` means zero.
        """
        if not isinstance(returns.index, pd.DatetimeIndex):
            raise TypeError("returns frame needs a DatetimeIndex")
        dates = returns.index.values.astype("datetime64[D]")
        values = returns.to_numpy(dtype=float)
        if rf is None:
            rf_arr = np.zeros(len(dates))
        elif isinstance(rf, pd.Series):
            rf_arr = align_risk_free(dates, rf.index.values.astype("datetime64[D]"),
                                     rf.to_numpy(dtype=float))
        else:
            rf_arr = np.broadcast_to(np.asarray(rf, dtype=float), (len(dates),)).copy()
        return cls(dates, tuple(str(c) for c in returns.columns), values, rf_arr)


@dataclass(frozen=True)
class MonthlySlices:
    """Partition of a return panel into contiguous calendar-month blocks."""

    panel: ReturnPanel
    months: list[Month]
    bounds: list[tuple[int, int]] = field(repr=False)

    def __len__(self) -> int:
        return len(self.months)

    def block(self, i: int) -> np.ndarray:
        start, stop = self.bounds[i]
        return self.panel.returns[start:stop]

    def __iter__(self) -> Iterator[tuple[Month, np.ndarray]]:
        for i, month in enumerate(self.months):
            yield month, self.block(i)

    def index(self, month: Month) -> int:
        return self.months.index(tuple(month))

    def row_stop(self, i: int) -> int:
        """Row index where month ``i`` ends (exclusive)."""
        return self.bounds[i][1]


def _read_rows(path: Path) -> Iterator[tuple[int, list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            yield reader.line_num, row


def load_price_panel(path, date_column: str = "date") -> PricePanel:
    """Read a wide price CSV, dropping any date with a missing asset value.

    Raises:
        DataParseError: malformed row (reports the line number).
        DataValidationError: non-positive price, duplicate date, too few assets.
    """
    path = Path(path)
    rows = _read_rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise DataParseError("empty file", path=path) from None
    header = [h.strip() for h in header]
    if date_column not in header:
        raise DataParseError(f"missing {date_column!r} column", line=1, path=path)
    date_idx = header.index(date_column)
    tickers = [h for i, h in enumerate(header) if i != date_idx]
    if len(tickers) < 2:
        raise DataValidationError(f"{path}: need at least 2 asset columns, found {len(tickers)}")
    if len(set(tickers)) != len(tickers):
        raise DataValidationError(f"{path}: duplicate ticker columns")

    dates, values = [], []
    seen = set()
    dropped = 0
    for line, row in rows:
        if len(row) != len(header):
            raise DataParseError(f"expected {len(header)} fields, got {len(row)}", line=line, path=path)
        try:
            d = _parse_date(row[date_idx])
        except ValueError:
            raise DataParseError(f"bad date {row[date_idx]!r}", line=line, path=path) from None
        if d in seen:
            raise DataValidationError(f"{path}:{line}: duplicate date {d.isoformat()}")
        seen.add(d)
        cells = [c.strip() for i, c in enumerate(row) if i != date_idx]
        if any(c == "" or c.lower() in ("nan", "na", "null") for c in cells):
            dropped += 1
            continue
        try:
            prices = [float(c) for c in cells]
        except ValueError:
            raise DataParseError("non-numeric price", line=line, path=path) from None
        for ticker, p in zip(tickers, prices):
            if not (p > 0) or not math.isfinite(p):
                raise DataValidationError(f"{path}:{line}: non-positive price {p!r} for {ticker}")
        dates.append(d)
        values.append(prices)
    if dropped:
        logger.info("dropped %d dates with missing prices from %s", dropped, path)

    order = np.argsort(np.array(dates, dtype="datetime64[D]"), kind="stable")
    date_arr = np.array(dates, dtype="datetime64[D]")[order]
    price_arr = np.array(values, dtype=float).reshape(len(dates), len(tickers))[order]
    return PricePanel(date_arr, tuple(tickers), price_arr)


def load_risk_free(path, percent: bool = True) -> pd.Series:
    """Read a ``date,rf`` file into a decimal daily-rate Series."""
    path = Path(path)
    rows = _read_rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise DataParseError("empty file", path=path) from None
    header = [h.strip().lower() for h in header]
    if "date" not in header or "rf" not in header:
        raise DataParseError("header must contain 'date' and 'rf'", line=1, path=path)
    di, ri = header.index("date"), header.index("rf")
    dates, values = [], []
    for line, row in rows:
        if len(row) != len(header):
            raise DataParseError(f"expected {len(header)} fields, got {len(row)}", line=line, path=path)
        try:
            dates.append(_parse_date(row[di]))
            values.append(float(row[ri]))
        except ValueError:
            raise DataParseError(f"bad row {row!r}", line=line, path=path) from None
    s = pd.Series(values, index=pd.DatetimeIndex(dates, name="date"), name="rf")
    if s.index.has_duplicates:
        raise DataValidationError(f"{path}: duplicate dates in risk-free file")
    s = s.sort_index()
    return s / 100.0 if percent else s


def align_risk_free(dates: np.ndarray, rf_dates: np.ndarray, rf_values: np.ndarray) -> np.ndarray:
    """Forward-fill ``rf`` onto ``dates``; every date needs a prior observation."""
    rf_dates = np.asarray(rf_dates, dtype="datetime64[D]")
    order = np.argsort(rf_dates, kind="stable")
    rf_dates, rf_values = rf_dates[order], np.asarray(rf_values, dtype=float)[order]
    pos = np.searchsorted(rf_dates, np.asarray(dates, dtype="datetime64[D]"), side="right") - 1
    if len(dates) and pos[0] < 0:
        raise CoverageError(f"risk-free series has no observation on or before {dates[0]}")
    return rf_values[pos]


def compute_returns(panel: PricePanel, rf=None) -> ReturnPanel:
    """Simple daily returns from a price panel.

    ``rf`` is a path to a Fama-French style file (percent per day), a Series
    of decimal daily rates, or ``None`` for a zero rate.
    """
    if len(panel.dates) < 2:
        raise DataValidationError("need at least 2 price dates to form returns")
    returns = panel.prices[1:] / panel.prices[:-1] - 1.0
    dates = panel.dates[1:]
    if rf is None:
        rf_arr = np.zeros(len(dates))
    else:
        if not isinstance(rf, pd.Series):
            rf = load_risk_free(rf)
        rf_arr = align_risk_free(dates, rf.index.values.astype("datetime64[D]"), rf.to_numpy(float))
    return ReturnPanel(dates, panel.tickers, returns, rf_arr)


def group_by_month(panel: ReturnPanel, min_rows: int = 2) -> MonthlySlices:
    """Split the panel into calendar months present in the data."""
    if len(panel) == 0:
        raise DataValidationError("empty return panel")
    month_ids = panel.dates.astype("datetime64[M]")
    starts = np.flatnonzero(np.r_[True, month_ids[1:] != month_ids[:-1]])
    stops = np.r_[starts[1:], len(month_ids)]
    months, bounds = [], []
    for a, b in zip(starts, stops):
        m = pd.Timestamp(month_ids[a])
        key = (m.year, m.month)
        if b - a < min_rows:
            raise DegenerateMonthError(f"month {format_month(key)} has {b - a} daily row(s); need {min_rows}")
        months.append(key)
        bounds.append((int(a), int(b)))
    return MonthlySlices(panel, months, bounds)


class RecessionLabels(dict):
    """Map of ``(year, month)`` to a recession flag; unknown months give ``None``."""

    def indicator(self, month: Month):
        return self.get(tuple(month))


def load_recession_labels(path) -> RecessionLabels:
    path = Path(path)
    rows = _read_rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise DataParseError("empty file", path=path) from None
    labels = RecessionLabels()
    for line, row in rows:
        if len(row) < 2:
            raise DataParseError("expected date,indicator", line=line, path=path)
        try:
            d = _parse_date(row[0])
        except ValueError:
            raise DataParseError(f"bad date {row[0]!r}", line=line, path=path) from None
        value = row[1].strip()
        try:
            flag = float(value)
        except ValueError:
            raise DataValidationError(f"{path}:{line}: non-binary indicator {value!r}") from None
        if flag not in (0.0, 1.0):
            raise DataValidationError(f"{path}:{line}: non-binary indicator {value!r}")
        labels[(d.year, d.month)] = bool(flag)
    return labels
