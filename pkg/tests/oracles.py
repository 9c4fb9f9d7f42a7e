"""Independent reference implementations used only by the tests."""

import itertools

import numpy as np


def covariance_double_loop(rows):
    """Unbiased covariance from the textbook double sum."""
    rows = np.asarray(rows, dtype=float)
    n, k = rows.shape
    mean = [sum(rows[t, a] for t in range(n)) / n for a in range(k)]
    cov = np.empty((k, k))
    for a in range(k):
        for b in range(k):
            cov[a, b] = sum((rows[t, a] - mean[a]) * (rows[t, b] - mean[b]) for t in range(n)) / (n - 1)
    return np.array(mean), cov


def kkt_min_variance(cov, mean, target):
    """min w'Vw s.t. w'e = 1, w'mean = target, solved as one KKT system."""
    n = len(mean)
    e = np.ones(n)
    K = np.zeros((n + 2, n + 2))
    K[:n, :n] = 2.0 * cov
    K[:n, n] = e
    K[:n, n + 1] = mean
    K[n, :n] = e
    K[n + 1, :n] = mean
    rhs = np.r_[np.zeros(n), 1.0, target]
    w = np.linalg.solve(K, rhs)[:n]
    return w, float(w @ cov @ w)


def min_variance_portfolio(cov):
    """Global minimum-variance weights from a bordered linear system."""
    n = cov.shape[0]
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = 2.0 * cov
    K[:n, n] = 1.0
    K[n, :n] = 1.0
    return np.linalg.solve(K, np.r_[np.zeros(n), 1.0])[:n]


def warping_paths(n, m):
    """Every monotone warping path from (0, 0) to (n-1, m-1)."""
    def walk(i, j):
        if i == n - 1 and j == m - 1:
            yield [(i, j)]
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                for tail in walk(a, b):
                    yield [(i, j)] + tail
    yield from walk(0, 0)


def dtw_brute_force(a, b):
    """Minimum over all warping paths, summing costs in path order."""
    best = np.inf
    for path in warping_paths(len(a), len(b)):
        total = 0.0
        for i, j in path:
            total = total + abs(a[i] - b[j])
        best = min(best, total)
    return best


def count_transitions(labels, K):
    counts = np.zeros((K, K))
    for prev, nxt in zip(labels[:-1], labels[1:]):
        counts[prev - 1, nxt - 1] += 1
    P = np.empty((K, K))
    for i in range(K):
        total = counts[i].sum()
        P[i] = counts[i] / total if total > 0 else 1.0 / K
    return P


def stationary_linear(P):
    """Solve pi (P - I) = 0 with sum(pi) = 1 by least squares on the stacked system."""
    K = P.shape[0]
    A = np.vstack([(P - np.eye(K)).T, np.ones(K)])
    b = np.r_[np.zeros(K), 1.0]
    return np.linalg.lstsq(A, b, rcond=None)[0]


def ols_normal_equations(y, x):
    X = np.column_stack([np.ones(len(x)), x])
    return np.linalg.inv(X.T @ X) @ X.T @ y


def best_two_partition(d):
    """Brute-force 2-partition minimising total within-cluster distance."""
    T = d.shape[0]
    best, best_labels = np.inf, None
    for mask in itertools.product((0, 1), repeat=T - 1):
        labels = (0,) + mask
        if len(set(labels)) < 2:
            continue
        cost = sum(d[i, j] for i in range(T) for j in range(i + 1, T) if labels[i] == labels[j])
        if cost < best:
            best, best_labels = cost, labels
    return np.array(best_labels)


def sharpe(w, mean, cov, hurdle=0.0):
    return float((w @ mean - hurdle) / np.sqrt(w @ cov @ w))


def random_feasible(n, budget, cap, size, rng):
    """Random portfolios with sum(w) = budget and sum|w| <= cap (rejection-free)."""
    out = []
    while len(out) < size:
        w = rng.normal(size=n)
        w = w - w.mean() + budget / n
        gross = np.abs(w).sum()
        if gross > cap:
            if budget == 0:
                w = w * cap / gross * rng.uniform()
            else:
                # shrink toward equal weights until inside the cap
                centre = np.full(n, budget / n)
                lo, hi = 0.0, 1.0
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if np.abs(centre + mid * (w - centre)).sum() <= cap:
                        lo = mid
                    else:
                        hi = mid
                w = centre + lo * rng.uniform() * (w - centre)
        if budget == 0 and np.allclose(w, 0):
            continue
        out.append(w)
    return np.array(out)
