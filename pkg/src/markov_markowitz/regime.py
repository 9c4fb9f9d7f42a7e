"""Market states from monthly frontier coefficients.

Months are compared through the correlation of their coefficient vectors,
turned into a metric with ``d = sqrt(2 (1 - rho))``. Each month's row of
that matrix is a distance profile ordered in time; profiles are compared
with dynamic time warping and the resulting month-by-month matrix is fed to
agglomerative clustering, cut into ``K`` states.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .exceptions import FallbackWarning

LINKAGES = ("average", "single", "complete")


@dataclass(frozen=True)
class MonthDistanceMatrix:
    months: list
    d: np.ndarray

    def __post_init__(self):
        if self.d.ndim != 2 or self.d.shape[0] != self.d.shape[1]:
            raise ValueError("distance matrix must be square")
        if len(self.months) != self.d.shape[0]:
            raise ValueError("one month key per row required")

    def __len__(self):
        return len(self.months)


@dataclass(frozen=True)
class Dendrogram:
    """Merge history in scipy's convention.

    Leaves are ``0..T-1``; merge ``k`` creates cluster id ``T + k``. Each
    merge is ``(left_id, right_id, height, size)`` with ``left_id < right_id``.
    """

    n_leaves: int
    merges: list = field(default_factory=list)

    def linkage_matrix(self) -> np.ndarray:
        return np.array(self.merges, dtype=float).reshape(-1, 4)

    def cut(self, n_clusters: int) -> np.ndarray:
        """Canonical 1-based labels after applying the first ``T - K`` merges.

        Clusters are numbered by their earliest member month.
        """
        T = self.n_leaves
        if not 1 <= n_clusters <= T:
            raise ValueError(f"cannot cut {T} leaves into {n_clusters} clusters")
        parent = list(range(2 * T - 1))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for k, (a, b, _, _) in enumerate(self.merges[: T - n_clusters]):
            parent[find(int(a))] = T + k
            parent[find(int(b))] = T + k
        roots = [find(i) for i in range(T)]
        labels = np.empty(T, dtype=int)
        order = {}
        for i, r in enumerate(roots):
            if r not in order:
                order[r] = len(order) + 1
            labels[i] = order[r]
        return labels

    def to_newick(self, names=None) -> str:
        """Nested-parenthesis tree; branch lengths are height differences."""
        T = self.n_leaves
        names = [str(i) for i in range(T)] if names is None else [str(n) for n in names]
        nodes = dict(enumerate(names))
        heights = dict.fromkeys(range(T), 0.0)
        for k, (a, b, h, _) in enumerate(self.merges):
            parts = [f"{nodes.pop(int(c))}:{h - heights[int(c)]:.6g}" for c in (a, b)]
            nodes[T + k] = f"({parts[0]},{parts[1]})"
            heights[T + k] = h
        (tree,) = nodes.values()
        return tree + ";"


def correlation_to_distance(rho):
    """``sqrt(2 (1 - rho))``; exact at rho in {1, 0, -1}."""
    rho = np.asarray(rho, dtype=float)
    out = np.sqrt(np.maximum(2.0 * (1.0 - rho), 0.0))
    return out if out.ndim else float(out)


def _month_correlations(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlation between columns of ``X``; flags zero-variance columns."""
    centered = X - X.mean(axis=0, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->j", centered, centered))
    flat = norms == 0
    safe = np.where(flat, 1.0, norms)
    rho = (centered.T @ centered) / np.outer(safe, safe)
    rho = np.clip(rho, -1.0, 1.0)
    rho[flat, :] = 0.0
    rho[:, flat] = 0.0
    np.fill_diagonal(rho, 1.0)
    return rho, flat


def coefficient_correlation_distance(coefficients, standardize: bool = True, months=None) -> MonthDistanceMatrix:
    """Month-by-month correlation distance of coefficient vectors.

    ``coefficients`` is ``T x 3`` (one row per month of ``r_mvp, sigma_mvp,
    u``) or an :class:`~markov_markowitz.frontier.EfCoefficientSeries`. With
    ``standardize`` each coefficient is z-scored across months first so the
    three incommensurate scales contribute comparably.
    """
    if hasattr(coefficients, "interpretable"):
        months = list(coefficients.months) if months is None else months
        X = coefficients.interpretable()
    else:
        X = np.asarray(coefficients, dtype=float)
    if X.ndim != 2:
        raise ValueError("coefficients must be 2-D (months x coefficients)")
    T = X.shape[0]
    if T < 3:
        raise ValueError(f"need at least 3 months, got {T}")
    if months is None:
        months = list(range(T))
    # rows = coefficients, columns = months
    data = X.T.copy()
    if standardize:
        mu = data.mean(axis=1, keepdims=True)
        sd = data.std(axis=1, keepdims=True)
        data = np.where(sd > 0, (data - mu) / np.where(sd > 0, sd, 1.0), 0.0)
    rho, flat = _month_correlations(data)
    if flat.any():
        bad = [months[i] for i in np.flatnonzero(flat)]
        warnings.warn(f"zero-variance coefficient vector for months {bad}; correlation set to 0",
                      FallbackWarning, stacklevel=2)
    d = correlation_to_distance(rho)
    np.fill_diagonal(d, 0.0)
    return MonthDistanceMatrix(list(months), d)


@numba.njit(cache=True)
def _dtw_core(a, b, window, prev, cur):
    n = a.shape[0]
    m = b.shape[0]
    prev[:] = np.inf
    prev[0] = 0.0
    for i in range(1, n + 1):
        lo = 1
        hi = m
        if window >= 0:
            lo = max(1, i - window)
            hi = min(m, i + window)
            cur[:] = np.inf
        else:
            cur[0] = np.inf
        ai = a[i - 1]
        left = cur[lo - 1]
        diag = prev[lo - 1]
        for j in range(lo, hi + 1):
            up = prev[j]
            best = diag
            if up < best:
                best = up
            if left < best:
                best = left
            left = best + abs(ai - b[j - 1])
            cur[j] = left
            diag = up
        tmp = prev
        prev = cur
        cur = tmp
    return prev[m]


@numba.njit(cache=True)
def _dtw_kernel(a, b, window):
    m = b.shape[0]
    return _dtw_core(a, b, window, np.empty(m + 1), np.empty(m + 1))


@numba.njit(cache=True)
def _dtw_matrix_kernel(rows, window):
    T = rows.shape[0]
    out = np.zeros((T, T))
    prev = np.empty(rows.shape[1] + 1)
    cur = np.empty(rows.shape[1] + 1)
    for i in range(T):
        for j in range(i + 1, T):
            d = _dtw_core(rows[i], rows[j], window, prev, cur)
            out[i, j] = d
            out[j, i] = d
    return out


def _window_arg(window) -> int:
    if window is None:
        return -1
    if window < 0:
        raise ValueError("window must be non-negative or None")
    return int(window)


def dtw_distance(a, b, window=None) -> float:
    """Classic DTW with absolute-difference local cost.

    Both endpoints are matched; ``window`` is an optional Sakoe-Chiba band
    half-width (``None`` = unbounded).
    """
    a = np.ascontiguousarray(a, dtype=float).ravel()
    b = np.ascontiguousarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("DTW needs non-empty sequences")
    w = _window_arg(window)
    if w >= 0 and abs(a.size - b.size) > w:
        raise ValueError("window narrower than the length difference; no warping path exists")
    return float(_dtw_kernel(a, b, w))


def dtw_distance_matrix(m: MonthDistanceMatrix, window=None) -> MonthDistanceMatrix:
    """DTW between every pair of rows of ``m`` (each row read in month order)."""
    rows = np.ascontiguousarray(m.d, dtype=float)
    if not np.all(np.isfinite(rows)):
        raise ValueError("distance matrix contains non-finite entries")
    return MonthDistanceMatrix(list(m.months), _dtw_matrix_kernel(rows, _window_arg(window)))


def agglomerate(d: np.ndarray, linkage: str = "average") -> Dendrogram:
    """Agglomerative clustering on a full distance matrix.

    Uses Lance-Williams updates. At each step the closest active pair is
    merged; exact ties go to the lowest ``(i, j)`` slot pair, and the merged
    cluster takes slot ``i``.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    d = np.array(d, dtype=float)
    T = d.shape[0]
    if d.shape != (T, T):
        raise ValueError("distance matrix must be square")
    work = d.copy()
    np.fill_diagonal(work, np.inf)
    # only the strict upper triangle is searched
    work[np.tril_indices(T)] = np.inf
    full = d.copy()
    size = np.ones(T, dtype=int)
    ids = np.arange(T)
    active = np.ones(T, dtype=bool)
    merges = []
    for k in range(T - 1):
        flat = int(np.argmin(work))
        i, j = divmod(flat, T)
        h = float(work[i, j])
        ni, nj = size[i], size[j]
        a, b = sorted((int(ids[i]), int(ids[j])))
        merges.append((a, b, h, int(ni + nj)))
        if linkage == "average":
            new = (ni * full[i] + nj * full[j]) / (ni + nj)
        elif linkage == "single":
            new = np.minimum(full[i], full[j])
        else:
            new = np.maximum(full[i], full[j])
        full[i, :] = new
        full[:, i] = new
        full[i, i] = 0.0
        active[j] = False
        size[i] = ni + nj
        ids[i] = T + k
        # refresh the searchable triangle for slot i and retire slot j
        work[j, :] = np.inf
        work[:, j] = np.inf
        lower = np.arange(T) < i
        col = np.where(active & lower, new, np.inf)
        work[:, i] = col
        row = np.where(active & ~lower, new, np.inf)
        row[i] = np.inf
        work[i, :] = row
    return Dendrogram(T, merges)


@dataclass(frozen=True)
class StateSequence:
    months: list
    labels: np.ndarray
    K: int


def hierarchical_cluster(d: MonthDistanceMatrix, K: int, linkage: str = "average"):
    """Cut the dendrogram of ``d`` into exactly ``K`` states.

    Returns ``(StateSequence, Dendrogram)`` with labels ``1..K`` numbered by
    each state's earliest month.
    """
    T = len(d)
    if K < 1 or K > T:
        raise ValueError(f"K must lie in [1, {T}], got {K}")
    dendro = agglomerate(d.d, linkage)
    labels = dendro.cut(K)
    return StateSequence(list(d.months), labels, K), dendro


class DTWHierarchicalClustering(ClusterMixin, BaseEstimator):
    """Cluster months into market states from their frontier coefficients.

    Parameters
    ----------
    n_clusters : int, default 4
    linkage : {"average", "single", "complete"}
    standardize : bool, default True
        z-score each coefficient across months before correlating.
    window : int or None
        Sakoe-Chiba half-width for DTW; ``None`` is unbounded.

    Attributes
    ----------
    labels_ : ndarray of int, 1-based state per month
    correlation_distance_, dtw_distance_ : ndarray (T, T)
    dendrogram_ : Dendrogram
    """

    def __init__(self, n_clusters=4, linkage="average", standardize=True, window=None):
        self.n_clusters = n_clusters
        self.linkage = linkage
        self.standardize = standardize
        self.window = window

    def fit(self, X, y=None):
        months = None
        if hasattr(X, "interpretable"):
            months = list(X.months)
        elif hasattr(X, "columns"):
            if set(("r_mvp", "sigma_mvp", "u")) <= set(X.columns):
                X = X.loc[:, ["r_mvp", "sigma_mvp", "u"]]
            months = list(X.index)
            X = X.to_numpy(dtype=float)
        if self.n_clusters < 2:
            raise ValueError("n_clusters must be at least 2")
        corr = coefficient_correlation_distance(X, self.standardize, months=months)
        if self.n_clusters > len(corr):
            raise ValueError(f"n_clusters={self.n_clusters} exceeds the {len(corr)} months")
        dtw = dtw_distance_matrix(corr, self.window)
        states, dendro = hierarchical_cluster(dtw, self.n_clusters, self.linkage)
        self.months_ = corr.months
        self.correlation_distance_ = corr.d
        self.dtw_distance_ = dtw.d
        self.dendrogram_ = dendro
        self.labels_ = states.labels
        self.n_features_in_ = 3
        return self
