"""Per-state tangency portfolios and their transition-weighted blend.

The tangency problem maximises ``(w'mean - rf) / sqrt(w'Vw)`` subject to
``sum(w) = budget`` (1 for a fully invested book, 0 for a zero-net book) and
a gross-exposure cap ``sum(|w|) <= gross_cap``. When a feasible portfolio
with positive excess return exists, the ratio is maximised exactly through
the homogenised convex program

    min y'Vy  s.t.  y'mean - rf*k = 1,  sum(y) = budget*k,
                    sum(|y|) <= gross_cap*k,  k >= 0,

with ``w = y / k``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from cvxopt import matrix, solvers
from scipy.optimize import minimize

from .data import MonthlySlices
from .exceptions import (
    DegenerateStateError,
    FallbackWarning,
    InfeasiblePortfolioError,
    MarkovMarkowitzError,
    NonPositiveExcessWarning,
)
from .frontier import DEFAULT_RIDGE, SampleMoments, is_invertible, sample_mean_cov
from .validation import check_labels, check_probability_vector

logger = logging.getLogger(__name__)

DEFAULT_GROSS_CAP = 1.5
# Sharpe ties within this band prefer the fully invested book.
TIE_TOL = 1e-10

_QP_OPTIONS = {"show_progress": False, "abstol": 1e-12, "reltol": 1e-12, "feastol": 1e-12, "maxiters": 200}


@dataclass(frozen=True)
class PortfolioWeights:
    w: np.ndarray
    budget: int
    sharpe: float
    method: str = "qp"

    @property
    def gross(self) -> float:
        return float(np.abs(self.w).sum())


@dataclass(frozen=True)
class StateWeightMatrix:
    W: np.ndarray
    budgets: np.ndarray
    sharpes: np.ndarray
    fallback: np.ndarray

    @property
    def K(self) -> int:
        return self.W.shape[0]


def portfolio_sharpe(w, mean, cov, hurdle: float = 0.0) -> float:
    """``(w'mean - hurdle) / sqrt(w'Vw)``; NaN for a zero-variance book."""
    w = np.asarray(w, dtype=float)
    var = float(w @ cov @ w)
    if not var > 0:
        return float("nan")
    return float((w @ mean - hurdle) / np.sqrt(var))


def _hurdle(rf: float, budget: int, subtract_rf: bool) -> float:
    return rf if (budget == 1 or subtract_rf) else 0.0


def _shrink_into_cap(w: np.ndarray, budget: int, cap: float) -> np.ndarray:
    """Largest step from the centre ``budget/n`` towards ``w`` that keeps gross <= cap."""
    gross = np.abs(w).sum()
    if gross <= cap:
        return w
    n = w.size
    centre = np.full(n, budget / n)
    if budget == 0:
        return w * (cap / gross)
    lo, hi = 0.0, 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.abs(centre + mid * (w - centre)).sum() <= cap:
            lo = mid
        else:
            hi = mid
    return centre + lo * (w - centre)


def _clean(w: np.ndarray, budget: int, cap: float) -> np.ndarray:
    w = w + (budget - w.sum()) / w.size
    if np.abs(w).sum() > cap:
        w = _shrink_into_cap(w, budget, cap)
    return w


def max_excess_return(mean, budget: int, gross_cap: float) -> float:
    """Largest ``w'mean`` over the feasible set (a two-asset vertex LP)."""
    mean = np.asarray(mean, dtype=float)
    if mean.size == 1:
        return float(budget * mean[0])
    hi, lo = mean.max(), mean.min()
    return float(0.5 * (gross_cap + budget) * hi - 0.5 * (gross_cap - budget) * lo)


def _closed_form_candidates(mean, cov, hurdle, budget, cap):
    """Unconstrained optima, pulled inside the cap when it binds."""
    n = mean.size
    e = np.ones(n)
    out = []
    if budget == 1:
        x = np.linalg.solve(cov, mean - hurdle * e)
        if x.sum() > 0:
            w = x / x.sum()
            if np.abs(w).sum() <= cap * (1 + 1e-12):
                out.append(("closed_form", w, True))
            else:
                out.append(("clipped", _shrink_into_cap(w, 1, cap), False))
    else:
        inv = np.linalg.solve(cov, np.column_stack([e, mean]))
        gamma = (e @ inv[:, 1]) / (e @ inv[:, 0])
        d = inv[:, 1] - gamma * inv[:, 0]
        gross = np.abs(d).sum()
        if gross > 0 and d @ mean > 0:
            w = d * ((cap if np.isfinite(cap) else 1.0) / gross)
            # scale-free ratio only when no hurdle is subtracted
            out.append(("closed_form", w, hurdle == 0.0))
    return out


def _solve_homogenised(mean, cov, hurdle, budget, cap):
    n = mean.size
    nv = 2 * n + 1
    P = np.zeros((nv, nv))
    P[:n, :n] = cov
    A = np.zeros((2, nv))
    A[0, :n] = mean
    A[0, -1] = -hurdle
    A[1, :n] = 1.0
    A[1, -1] = -budget
    eye = np.eye(n)
    G = np.zeros((2 * n + 2, nv))
    G[:n, :n] = eye
    G[:n, n:2 * n] = -eye
    G[n:2 * n, :n] = -eye
    G[n:2 * n, n:2 * n] = -eye
    G[2 * n, n:2 * n] = 1.0
    G[2 * n, -1] = -cap
    G[2 * n + 1, -1] = -1.0
    sol = solvers.qp(matrix(P), matrix(np.zeros(nv)), matrix(G), matrix(np.zeros(2 * n + 2)),
                     matrix(A), matrix([1.0, 0.0]), options=_QP_OPTIONS)
    z = np.array(sol["x"]).ravel()
    if z[-1] <= 0:
        raise np.linalg.LinAlgError("homogenised program returned a non-positive scale")
    return z[:n] / z[-1], sol["status"]


def sample_feasible(n: int, budget: int, cap: float, size: int, rng) -> np.ndarray:
    """Random portfolios with ``sum = budget`` and ``gross <= cap``."""
    centre = np.full(n, budget / n)
    z = rng.standard_normal((size, n))
    d = z - z.mean(axis=1, keepdims=True)
    lo = np.zeros(size)
    hi = np.full(size, 1.0)
    while True:
        over = np.abs(centre + hi[:, None] * d).sum(axis=1) <= cap
        if not over.any():
            break
        hi[over] *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        ok = np.abs(centre + mid[:, None] * d).sum(axis=1) <= cap
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return centre + (rng.uniform(size=size) * lo)[:, None] * d


def _search(mean, cov, hurdle, budget, cap, starts):
    """Local ratio maximisation from several starts over split variables."""
    n = mean.size

    def neg(z):
        w = z[:n] - z[n:]
        return -(w @ mean - hurdle) / np.sqrt(max(w @ cov @ w, 1e-300))

    cons = [
        {"type": "eq", "fun": lambda z: np.sum(z[:n] - z[n:]) - budget},
        {"type": "ineq", "fun": lambda z: cap - np.sum(z[:n] + z[n:])},
    ]
    best = None
    for w0 in starts:
        z0 = np.concatenate([np.maximum(w0, 0), np.maximum(-w0, 0)])
        res = minimize(neg, z0, method="SLSQP", bounds=[(0, None)] * (2 * n), constraints=cons,
                       options={"maxiter": 500, "ftol": 1e-14})
        w = _clean(res.x[:n] - res.x[n:], budget, cap)
        s = portfolio_sharpe(w, mean, cov, hurdle)
        if np.isfinite(s) and (best is None or s > best[1]):
            best = (w, s)
    return best


def tangency_portfolio(m: SampleMoments, rf: float = 0.0, budget: int = 1,
                       gross_cap: float = DEFAULT_GROSS_CAP, subtract_rf: bool = True,
                       seed: int = 0) -> PortfolioWeights:
    """Maximum-Sharpe portfolio under a budget and a gross-exposure cap.

    ``subtract_rf=False`` drops the rate from the zero-budget objective (a
    zero-cost book earns no financing); budget-1 books always subtract it.

    Raises:
        InfeasiblePortfolioError: ``gross_cap < |budget|`` or a zero-budget
            book on a single asset.
    """
    if budget not in (0, 1):
        raise ValueError(f"budget must be 0 or 1, got {budget!r}")
    if not gross_cap >= abs(budget):
        raise InfeasiblePortfolioError(f"gross_cap={gross_cap} cannot hold a budget of {budget}")
    mean = np.atleast_1d(np.asarray(m.mean, dtype=float))
    cov = np.atleast_2d(np.asarray(m.cov, dtype=float))
    n = mean.size
    hurdle = _hurdle(rf, budget, subtract_rf)
    if budget == 0 and (n == 1 or gross_cap == 0):
        raise InfeasiblePortfolioError("a zero-budget book needs two assets and a positive gross cap")
    if n == 1:
        w = np.ones(1)
        return PortfolioWeights(w, 1, portfolio_sharpe(w, mean, cov, hurdle), "trivial")

    # rescaling V and (mean, hurdle) leaves the argmax unchanged
    v_scale = float(np.mean(np.diag(cov)))
    if not v_scale > 0:
        raise np.linalg.LinAlgError("covariance has a zero diagonal")
    r_scale = max(float(np.max(np.abs(mean))), abs(hurdle), 1e-300)
    cov_s, mean_s, hurdle_s = cov / v_scale, mean / r_scale, hurdle / r_scale

    candidates = []
    for name, w, exact in _closed_form_candidates(mean_s, cov_s, hurdle_s, budget, gross_cap):
        if exact:
            return PortfolioWeights(w, budget, portfolio_sharpe(w, mean, cov, hurdle), "closed_form")
        candidates.append((name, w))
    if not np.isfinite(gross_cap):
        raise InfeasiblePortfolioError("unbounded problem: the closed form does not apply, set a finite gross cap")

    if max_excess_return(mean_s, budget, gross_cap) - hurdle_s > 0:
        w, status = _solve_homogenised(mean_s, cov_s, hurdle_s, budget, gross_cap)
        if status != "optimal":
            logger.debug("tangency QP finished with status %s", status)
        candidates.append(("qp", _clean(w, budget, gross_cap)))
    else:
        warnings.warn("no feasible portfolio has positive excess return; maximising the ratio anyway",
                      NonPositiveExcessWarning, stacklevel=2)
        rng = np.random.default_rng(seed)
        starts = [w for _, w in candidates]
        starts.append(np.full(n, budget / n) if budget else np.r_[0.5, -0.5, np.zeros(n - 2)] * gross_cap)
        starts.extend(sample_feasible(n, budget, gross_cap, 16, rng))
        found = _search(mean_s, cov_s, hurdle_s, budget, gross_cap, starts)
        if found is not None:
            candidates.append(("search", found[0]))

    best = None
    for name, w in candidates:
        s = portfolio_sharpe(w, mean, cov, hurdle)
        if np.isfinite(s) and (best is None or s > best.sharpe):
            best = PortfolioWeights(w, budget, s, name)
    if best is None:
        raise MarkovMarkowitzError("tangency solve produced no finite-Sharpe candidate")
    return best


def partition_returns_by_state(slices: MonthlySlices, labels, K: int | None = None,
                               strict: bool = True) -> list[np.ndarray]:
    """Daily return rows grouped by the state of their month.

    ``labels`` covers the first ``len(labels)`` months of ``slices``.
    """
    labels = check_labels(labels, K)
    K = int(labels.max()) if K is None else K
    if len(labels) > len(slices):
        raise ValueError("more labels than months")
    groups: list[list[np.ndarray]] = [[] for _ in range(K)]
    for i, s in enumerate(labels):
        groups[s - 1].append(slices.block(i))
    n = slices.panel.n_assets
    parts = [np.concatenate(g) if g else np.empty((0, n)) for g in groups]
    if strict:
        for s, rows in enumerate(parts, start=1):
            if rows.shape[0] < 2:
                raise DegenerateStateError(f"state {s} holds {rows.shape[0]} daily row(s); need 2")
    return parts


def state_weight_matrix(partitions, rf: float, gross_cap: float = DEFAULT_GROSS_CAP,
                        ridge: float = DEFAULT_RIDGE, subtract_rf_zero_budget: bool = True,
                        seed: int = 0) -> StateWeightMatrix:
    """Tangency weights per state, keeping the budget with the better in-sample Sharpe.

    Ties (within ``TIE_TOL``) go to the fully invested book. A state whose
    moments cannot be solved falls back to equal weights with a warning.
    """
    K = len(partitions)
    n = partitions[0].shape[1]
    W = np.zeros((K, n))
    budgets = np.ones(K, dtype=int)
    sharpes = np.full(K, np.nan)
    fallback = np.zeros(K, dtype=bool)
    for s, rows in enumerate(partitions):
        try:
            m = sample_mean_cov(rows, ridge)
            if not is_invertible(m.cov):
                raise np.linalg.LinAlgError("covariance is singular even after the ridge")
            best = tangency_portfolio(m, rf, 1, gross_cap, subtract_rf_zero_budget, seed)
            if n > 1 and gross_cap > 0:
                short = tangency_portfolio(m, rf, 0, gross_cap, subtract_rf_zero_budget, seed)
                if short.sharpe > best.sharpe + TIE_TOL:
                    best = short
        except (np.linalg.LinAlgError, MarkovMarkowitzError) as exc:
            if isinstance(exc, InfeasiblePortfolioError) and gross_cap < 1:
                raise
            warnings.warn(f"state {s + 1}: {exc}; using equal weights", FallbackWarning, stacklevel=2)
            W[s] = 1.0 / n
            fallback[s] = True
            continue
        W[s] = best.w
        budgets[s] = best.budget
        sharpes[s] = best.sharpe
    return StateWeightMatrix(W, budgets, sharpes, fallback)


def markov_markowitz_weights(W, p) -> np.ndarray:
    """``sum_s p[s] * W[s]``: the transition-weighted expectation of state books."""
    W = W.W if isinstance(W, StateWeightMatrix) else np.asarray(W, dtype=float)
    p = check_probability_vector(p)
    if W.ndim != 2 or W.shape[0] != p.size:
        raise ValueError(f"need {p.size} state rows, got shape {W.shape}")
    out = np.zeros(W.shape[1])
    for ps, row in zip(p, W):
        out += ps * row
    return out
