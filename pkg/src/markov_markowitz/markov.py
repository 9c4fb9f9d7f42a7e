"""Observable Markov chain over clustered market states.

States are 1-based. ``P[i-1, j-1]`` is the probability of moving from state
``i`` this month to state ``j`` next month (rows are the source state).
"""

from __future__ import annotations

import numpy as np

from .exceptions import ReducibleChainError
from .validation import check_labels, check_stochastic


def transition_counts(labels, K: int) -> np.ndarray:
    """``K x K`` counts of consecutive ``i -> j`` pairs."""
    s = check_labels(labels, K) - 1
    counts = np.zeros((K, K))
    np.add.at(counts, (s[:-1], s[1:]), 1.0)
    return counts


def estimate_transition_matrix(labels, K: int | None = None, pseudo_count: float = 0.0) -> np.ndarray:
    """Maximum-likelihood transition matrix from a label sequence.

    A state with no departures (unvisited, or seen only in the last month)
    gets a uniform row so every row stays a probability distribution.
    ``pseudo_count`` adds the same count to every cell before normalising.
    """
    s = check_labels(labels)
    if s.size < 2:
        raise ValueError("need at least 2 labels to estimate transitions")
    if K is None:
        K = int(s.max())
    if pseudo_count < 0:
        raise ValueError("pseudo_count must be non-negative")
    counts = transition_counts(s, K) + pseudo_count
    departures = counts.sum(axis=1)
    P = np.full((K, K), 1.0 / K)
    has = departures > 0
    P[has] = counts[has] / departures[has, None]
    return P


def transition_row(P, current: int) -> np.ndarray:
    """Next-month state distribution given the 1-based ``current`` state."""
    P = np.asarray(P, dtype=float)
    K = P.shape[0]
    if not 1 <= int(current) <= K or int(current) != current:
        raise ValueError(f"state {current!r} outside 1..{K}")
    return P[int(current) - 1].copy()


def steady_state(P, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Stationary distribution by power iteration from the uniform vector.

    Raises:
        ReducibleChainError: no convergence within ``max_iter`` steps
            (periodic chain); ``last_iterate`` holds the final vector.
    """
    P = check_stochastic(P)
    K = P.shape[0]
    pi = np.full(K, 1.0 / K)
    for _ in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    raise ReducibleChainError(
        f"power iteration did not converge in {max_iter} steps (periodic or reducible chain)",
        last_iterate=pi,
    )
