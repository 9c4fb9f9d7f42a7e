"""Plain-text exports of pipeline results.

Every writer emits comma-separated text with a header row. Floats are
written at full round-trip precision so a run can be compared
bit-for-bit against another.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from .data import format_month
from .exceptions import FallbackWarning, ReducibleChainError
from .frontier import COEFFICIENT_COLUMNS, EfCoefficientSeries
from .markov import steady_state

logger = logging.getLogger(__name__)

BACKTEST_FILES = (
    "daily_returns.csv",
    "wealth.csv",
    "weights.csv",
    "states.csv",
    "transition_matrix.csv",
    "steady_state.csv",
    "metrics.json",
)


def _fmt(x) -> str:
    return repr(float(x))


class ExportSet:
    """Tracks the files written into one output directory.

    Use as a context manager: if the block raises, every file written
    through :meth:`path` is removed again so a failed run leaves no partial
    result set behind.
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        p = self.out_dir / name
        self.written.append(p)
        return p

    def rollback(self):
        for p in self.written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        self.written.clear()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            logger.debug("removing %d partial export(s)", len(self.written))
            self.rollback()
        return False


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_coefficients(path, series: EfCoefficientSeries) -> int:
    """``year,month,A,B,C,r_mvp,sigma_mvp,u``; returns the number of rows."""
    rows = [[y, m, *map(_fmt, c.as_tuple())] for (y, m), c in zip(series.months, series.coeffs)]
    _write_rows(path, ["year", "month", *COEFFICIENT_COLUMNS], rows)
    return len(rows)


def write_states(path, months, labels, recession=None) -> int:
    """``year,month,state`` plus a ``recession`` column (1/0/blank) when labels are given."""
    header = ["year", "month", "state"]
    if recession is not None:
        header.append("recession")
    rows = []
    for (y, m), s in zip(months, labels):
        row = [y, m, int(s)]
        if recession is not None:
            flag = recession.indicator((y, m))
            row.append("" if flag is None else int(flag))
        rows.append(row)
    _write_rows(path, header, rows)
    return len(rows)


def write_dendrogram(path, dendrogram, newick_path=None, names=None):
    """One merge per line: ``left_id,right_id,height,size``; optional Newick file."""
    rows = [[int(a), int(b), _fmt(h), int(n)] for a, b, h, n in dendrogram.merges]
    _write_rows(path, ["left_id", "right_id", "height", "size"], rows)
    if newick_path is not None:
        Path(newick_path).write_text(dendrogram.to_newick(names) + "\n")


def write_transition_matrix(path, P):
    """Header ``1..K`` then K rows; row ``i`` is the distribution after state ``i``."""
    P = np.asarray(P, dtype=float)
    K = P.shape[0]
    _write_rows(path, [str(s) for s in range(1, K + 1)], [[_fmt(v) for v in row] for row in P])


def write_steady_state(path, pi):
    pi = np.asarray(pi, dtype=float)
    _write_rows(path, [str(s) for s in range(1, pi.size + 1)], [[_fmt(v) for v in pi]])


def steady_state_or_last(P) -> np.ndarray:
    """Steady state, or the last power iterate (with a warning) if it did not settle."""
    try:
        return steady_state(P)
    except ReducibleChainError as exc:
        warnings.warn(f"{exc}; exporting the last iterate", FallbackWarning, stacklevel=2)
        return exc.last_iterate


def write_state_weights(path, state_weights, tickers):
    """``state,budget,sharpe,<ticker>...``, one row per state."""
    rows = []
    for s in range(state_weights.K):
        rows.append([s + 1, int(state_weights.budgets[s]), _fmt(state_weights.sharpes[s]),
                     *map(_fmt, state_weights.W[s])])
    _write_rows(path, ["state", "budget", "sharpe", *tickers], rows)


def _frame_to_csv(frame: pd.DataFrame, path, index_label):
    frame.to_csv(path, index_label=index_label, float_format=_fmt, lineterminator="\n")


def write_backtest(exports: ExportSet, result, recession=None, inputs=None) -> list[Path]:
    """Write the full backtest result set into ``exports``.

    States, transition matrix and steady state come from the model fitted
    for the final test month.
    """
    daily = result.returns.copy()
    daily["rf"] = result.rf
    daily.index = daily.index.strftime("%Y-%m-%d")
    _frame_to_csv(daily, exports.path("daily_returns.csv"), "date")

    wealth = result.wealth
    wealth.index = wealth.index.strftime("%Y-%m-%d")
    _frame_to_csv(wealth, exports.path("wealth.csv"), "date")

    w = result.weights
    rows = [[p.year, p.month, *map(_fmt, vals)] for p, vals in zip(w.index, w.to_numpy())]
    _write_rows(exports.path("weights.csv"), ["year", "month", *w.columns], rows)

    final = result.final
    months = final_training_months(result)
    write_states(exports.path("states.csv"), months, final.labels, recession)
    write_transition_matrix(exports.path("transition_matrix.csv"), final.transition_matrix)
    write_steady_state(exports.path("steady_state.csv"), steady_state_or_last(final.transition_matrix))

    payload = {
        "config": result.config.to_dict(),
        "seed": result.config.seed,
        "inputs": dict(inputs or {}),
        "test_months": [format_month(r.month) for r in result.records],
        "metrics": result.metrics.to_dict(),
    }
    with open(exports.path("metrics.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return list(exports.written)


def final_training_months(result) -> list:
    """Months the final model was trained on (all months before the last test month)."""
    n = len(result.final.labels)
    return list(result.training_months[:n])


def read_daily_returns(path) -> tuple[pd.DataFrame, np.ndarray]:
    """Load ``daily_returns.csv`` back as ``(returns, rf)``."""
    frame = pd.read_csv(path, index_col="date", parse_dates=["date"], float_precision="round_trip")
    if "rf" not in frame.columns:
        raise ValueError(f"{path}: no rf column")
    rf = frame.pop("rf").to_numpy(dtype=float)
    return frame, rf
