"""Command-line entry point.

Subcommands::

    markov-markowitz coefficients --prices P [--rf R] --out DIR
    markov-markowitz cluster      --prices P [--rf R] --out DIR --k 4 [--train-only --test-start YYYY-MM]
    markov-markowitz backtest     --prices P [--rf R] --out DIR --test-start YYYY-MM [...]
    markov-markowitz report       --out DIR [--json]

Settings may also come from ``--config`` (YAML or JSON, keys named like the
long flags); flags given on the command line win. Exit status is 0 on
success, 1 on a runtime or data error and 2 on a usage or configuration
error. Diagnostics go to stderr, one line each.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import export
from .allocation import DEFAULT_GROSS_CAP
from .backtest import (
    BUILTIN_BENCHMARKS,
    MIN_TRAIN_MONTHS,
    STRATEGY,
    BacktestConfig,
    build_report,
    resolve_test_start,
    run_online_backtest,
)
from .data import (
    PricePanel,
    compute_returns,
    format_month,
    group_by_month,
    load_price_panel,
    load_recession_labels,
    load_risk_free,
    parse_month,
)
from .exceptions import MarkovMarkowitzError
from .frontier import DEFAULT_RIDGE, monthly_coefficients
from .markov import estimate_transition_matrix
from .regime import LINKAGES, DTWHierarchicalClustering

logger = logging.getLogger("markov_markowitz")

PROG = "markov-markowitz"

DEFAULTS = {
    "prices": None,
    "rf": None,
    "rf_units": "percent",
    "recession": None,
    "assets": None,
    "out": ".",
    "k": 4,
    "linkage": "average",
    "standardize": True,
    "window": None,
    "seed": 0,
    "gross_cap": DEFAULT_GROSS_CAP,
    "fee_rate": 0.01,
    "ridge": DEFAULT_RIDGE,
    "test_start": None,
    "train_only": False,
    "benchmarks": list(BUILTIN_BENCHMARKS),
    "min_train_months": MIN_TRAIN_MONTHS,
}


class UsageError(Exception):
    """Bad arguments or configuration (exit status 2)."""


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _month_arg(text):
    try:
        return parse_month(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Markov-Markowitz regime-based asset allocation.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    # every option defaults to None so that config-file values can be told apart
    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--config", help="YAML or JSON file of settings; flags override it")
    inputs.add_argument("--prices", help="wide CSV of daily prices with a 'date' column")
    inputs.add_argument("--rf", help="date,rf file of daily risk-free rates")
    inputs.add_argument("--rf-units", choices=("percent", "decimal"), default=None,
                        help="units of the rf column (default percent)")
    inputs.add_argument("--assets", type=_csv_list, default=None,
                        help="comma-separated tickers to allocate over (default: all non-benchmark columns)")
    inputs.add_argument("--out", help="output directory (created if absent)")
    inputs.add_argument("--ridge", type=float, default=None)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--k", type=int, default=None, help="number of market states (>= 2)")
    model.add_argument("--linkage", choices=LINKAGES, default=None)
    model.add_argument("--no-standardize", dest="standardize", action="store_const", const=False, default=None,
                       help="correlate raw coefficients instead of z-scored ones")
    model.add_argument("--window", type=int, default=None, help="DTW band half-width")
    model.add_argument("--seed", type=int, default=None)
    model.add_argument("--recession", help="date,indicator file of recession months")
    model.add_argument("--test-start", type=_month_arg, default=None, metavar="YYYY-MM")

    sub.add_parser("coefficients", parents=[inputs], help="monthly efficient-frontier coefficients")

    p = sub.add_parser("cluster", parents=[inputs, model], help="market states and transition matrix")
    p.add_argument("--train-only", action="store_const", const=True, default=None,
                   help="use only months before --test-start")

    p = sub.add_parser("backtest", parents=[inputs, model], help="online expanding backtest")
    p.add_argument("--gross-cap", type=float, default=None)
    p.add_argument("--fee-rate", type=float, default=None)
    p.add_argument("--benchmarks", type=_csv_list, default=None,
                   help="comma list of tangency, equal_weight and/or price-file tickers")
    p.add_argument("--min-train-months", type=int, default=None)

    p = sub.add_parser("report", help="re-render metrics from a backtest output directory")
    p.add_argument("--out", required=True, help="directory holding daily_returns.csv")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    return parser


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise UsageError(f"{path}: cannot parse config: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a mapping")
    out = {}
    for key, value in data.items():
        name = str(key).replace("-", "_")
        if name == "no_standardize":
            name, value = "standardize", not value
        if name not in DEFAULTS:
            raise UsageError(f"{path}: unknown config key {key!r}")
        if name in ("assets", "benchmarks") and isinstance(value, str):
            value = _csv_list(value)
        if name == "test_start" and value is not None:
            try:
                value = parse_month(str(value))
            except ValueError as exc:
                raise UsageError(f"{path}: {exc}") from None
        out[name] = value
    return out


def resolve_settings(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(load_config_file(args.config))
    for name in DEFAULTS:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    if settings["k"] is not None and settings["k"] < 2:
        raise UsageError(f"--k must be at least 2, got {settings['k']}")
    return settings


def _existing(path, what) -> Path:
    if path is None:
        raise UsageError(f"--{what} is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} file not found: {p}")
    return p


def load_inputs(settings: dict, benchmark_tickers=()):
    """Read prices and rates; returns ``(ReturnPanel, benchmark_returns or None)``."""
    prices_path = _existing(settings["prices"], "prices")
    rf = None
    if settings["rf"] is not None:
        rf = load_risk_free(_existing(settings["rf"], "rf"), percent=settings["rf_units"] == "percent")
    prices = load_price_panel(prices_path)
    missing = [t for t in benchmark_tickers if t not in prices.tickers]
    if missing:
        raise UsageError(f"benchmark ticker(s) not in {prices_path}: {', '.join(missing)}")
    if settings["assets"]:
        universe = list(settings["assets"])
        unknown = [t for t in universe if t not in prices.tickers]
        if unknown:
            raise UsageError(f"asset(s) not in {prices_path}: {', '.join(unknown)}")
    else:
        universe = [t for t in prices.tickers if t not in benchmark_tickers]
    if len(universe) < 2:
        raise UsageError("need at least 2 assets to allocate over")
    cols = [prices.tickers.index(t) for t in universe]
    panel = compute_returns(PricePanel(prices.dates, tuple(universe), prices.prices[:, cols]), rf)
    bench = None
    if benchmark_tickers:
        cols = [prices.tickers.index(t) for t in benchmark_tickers]
        px = prices.prices[:, cols]
        bench = pd.DataFrame(px[1:] / px[:-1] - 1.0, columns=list(benchmark_tickers),
                             index=pd.DatetimeIndex(prices.dates[1:]))
    return panel, bench


def _recession(settings):
    if settings["recession"] is None:
        return None
    return load_recession_labels(_existing(settings["recession"], "recession"))


def cmd_coefficients(settings: dict) -> int:
    panel, _ = load_inputs(settings)
    series = monthly_coefficients(group_by_month(panel), settings["ridge"])
    with export.ExportSet(settings["out"]) as out:
        target = out.path("coefficients.csv")
        n = export.write_coefficients(target, series)
    print(f"{n} rows written to {target}")
    return 0


def cmd_cluster(settings: dict) -> int:
    recession = _recession(settings)
    panel, _ = load_inputs(settings)
    slices = group_by_month(panel)
    if settings["train_only"]:
        if settings["test_start"] is None:
            raise UsageError("--train-only needs --test-start")
        cfg = BacktestConfig(test_start=settings["test_start"], n_clusters=settings["k"],
                             min_train_months=settings["min_train_months"])
        try:
            stop = resolve_test_start(slices, cfg)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        panel = panel.head(slices.bounds[stop][0])
        slices = group_by_month(panel)
    series = monthly_coefficients(slices, settings["ridge"])
    if settings["k"] > len(series):
        raise UsageError(f"--k {settings['k']} exceeds the {len(series)} months available")
    model = DTWHierarchicalClustering(settings["k"], settings["linkage"], settings["standardize"],
                                      settings["window"]).fit(series)
    P = estimate_transition_matrix(model.labels_, settings["k"])
    names = [format_month(m) for m in model.months_]
    with export.ExportSet(settings["out"]) as out:
        export.write_states(out.path("states.csv"), model.months_, model.labels_, recession)
        export.write_dendrogram(out.path("dendrogram.csv"), model.dendrogram_,
                                out.path("dendrogram.nwk"), names)
        export.write_transition_matrix(out.path("transition_matrix.csv"), P)
        export.write_steady_state(out.path("steady_state.csv"), export.steady_state_or_last(P))
    print(f"{len(names)} months in {settings['k']} states written to {Path(settings['out'])}")
    return 0


def backtest_config(settings: dict) -> BacktestConfig:
    if settings["test_start"] is None:
        raise UsageError("--test-start is required for backtest")
    try:
        return BacktestConfig(
            test_start=settings["test_start"],
            n_clusters=settings["k"],
            gross_cap=settings["gross_cap"],
            fee_rate=settings["fee_rate"],
            ridge=settings["ridge"],
            standardize=settings["standardize"],
            linkage=settings["linkage"],
            window=settings["window"],
            seed=settings["seed"],
            benchmarks=tuple(settings["benchmarks"]),
            min_train_months=settings["min_train_months"],
        )
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def cmd_backtest(settings: dict) -> int:
    cfg = backtest_config(settings)
    tickers = tuple(b for b in cfg.benchmarks if b not in BUILTIN_BENCHMARKS)
    recession = _recession(settings)
    panel, bench = load_inputs(settings, tickers)
    try:
        resolve_test_start(group_by_month(panel), cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = run_online_backtest(panel, cfg, bench)
    inputs = {k: settings[k] for k in ("prices", "rf", "rf_units", "recession", "assets")}
    inputs["prices"] = str(inputs["prices"])
    inputs["assets"] = list(panel.tickers)
    with export.ExportSet(settings["out"]) as out:
        export.write_backtest(out, result, recession, inputs)
    print(result.metrics.table().to_string())
    return 0


def cmd_report(out_dir, as_json: bool = False) -> int:
    path = Path(out_dir) / "daily_returns.csv"
    if not path.is_file():
        raise UsageError(f"no daily_returns.csv in {out_dir}")
    returns, rf = export.read_daily_returns(path)
    report = build_report(returns, rf, STRATEGY)
    if as_json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(f"{report.start} .. {report.end} ({report.n_days} days)")
        print(report.table().to_string())
        if report.alphas:
            print(pd.DataFrame(report.alphas).T.to_string())
    return 0


def _format_warning(message, category, filename, lineno, line=None):
    return f"{PROG}: warning: {category.__name__}: {message}\n"


def _setup_logging(verbosity: int):
    level = logging.WARNING - 10 * min(verbosity, 2)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(f"{PROG}: %(levelname)s: %(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False
    warnings.formatwarning = _format_warning


def _one_line(exc) -> str:
    return " ".join(str(exc).split())


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        if args.command == "report":
            return cmd_report(args.out, args.json)
        settings = resolve_settings(args)
        handler = {"coefficients": cmd_coefficients, "cluster": cmd_cluster, "backtest": cmd_backtest}
        return handler[args.command](settings)
    except UsageError as exc:
        print(f"{PROG}: error: {_one_line(exc)}", file=sys.stderr)
        return 2
    except (MarkovMarkowitzError, np.linalg.LinAlgError, ValueError, OSError) as exc:
        print(f"{PROG}: error: {_one_line(exc)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
