import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from markov_markowitz.allocation import (
    StateWeightMatrix,
    markov_markowitz_weights,
    max_excess_return,
    partition_returns_by_state,
    portfolio_sharpe,
    sample_feasible,
    state_weight_matrix,
    tangency_portfolio,
)
from markov_markowitz.data import group_by_month
from markov_markowitz.exceptions import (
    DegenerateStateError,
    FallbackWarning,
    InfeasiblePortfolioError,
    NonPositiveExcessWarning,
)
from markov_markowitz.frontier import SampleMoments, sample_mean_cov
from markov_markowitz.synthetic import gaussian_panel, regime_switching_panel

from oracles import random_feasible, sharpe


def _m(mean, cov):
    return SampleMoments(np.asarray(mean, float), np.asarray(cov, float), 30, False)


def _random_moments(rng, n):
    X = rng.normal(size=(n, n))
    cov = (X @ X.T + 0.3 * np.eye(n)) * 1e-4
    mean = rng.normal(0.0005, 0.001, size=n)
    return _m(mean, cov)


def test_identity_closed_form():
    book = tangency_portfolio(_m([0.1, 0.3], np.eye(2)), 0.0, 1, np.inf)
    np.testing.assert_allclose(book.w, [0.25, 0.75], atol=1e-12)
    assert book.method == "closed_form"


def test_symmetric_assets():
    book = tangency_portfolio(_m([0.2, 0.2], np.eye(2)), 0.0, 1)
    np.testing.assert_allclose(book.w, [0.5, 0.5], atol=1e-12)


def test_zero_budget_binds_cap():
    book = tangency_portfolio(_m([0.1, 0.3], np.eye(2)), 0.0, 0, 1.5)
    np.testing.assert_allclose(book.w, [-0.75, 0.75], atol=1e-9)
    # grid over the antisymmetric family w = (-a, a)
    grid = np.linspace(1e-6, 0.75, 301)
    best = max(sharpe(np.array([-a, a]), np.array([0.1, 0.3]), np.eye(2)) for a in grid)
    assert book.sharpe >= best - 1e-12


def test_infeasible_arguments():
    with pytest.raises(InfeasiblePortfolioError):
        tangency_portfolio(_m([0.1, 0.3], np.eye(2)), 0.0, 1, 0.5)
    with pytest.raises(InfeasiblePortfolioError):
        tangency_portfolio(_m([0.1], [[1.0]]), 0.0, 0, 1.5)
    with pytest.raises(ValueError):
        tangency_portfolio(_m([0.1, 0.3], np.eye(2)), 0.0, 2)


def test_single_asset():
    book = tangency_portfolio(_m([0.1], [[0.04]]), 0.0, 1)
    np.testing.assert_array_equal(book.w, [1.0])


def test_max_excess_return_lp():
    assert max_excess_return([0.1, 0.3], 1, 1.5) == pytest.approx(1.25 * 0.3 - 0.25 * 0.1)
    assert max_excess_return([0.1, 0.3], 0, 1.5) == pytest.approx(0.75 * 0.2)


@pytest.mark.parametrize("budget", [0, 1])
def test_sample_feasible(budget):
    W = sample_feasible(4, budget, 1.5, 500, np.random.default_rng(0))
    np.testing.assert_allclose(W.sum(axis=1), budget, atol=1e-12)
    assert np.all(np.abs(W).sum(axis=1) <= 1.5 + 1e-12)


def test_nonpositive_excess_warns():
    m = _m([-0.01, -0.02, -0.015], np.diag([1e-4, 2e-4, 1.5e-4]))
    with pytest.warns(NonPositiveExcessWarning):
        book = tangency_portfolio(m, 0.0, 1, 1.5)
    assert abs(book.w.sum() - 1) <= 1e-8
    assert np.abs(book.w).sum() <= 1.5 + 1e-8
    rng = np.random.default_rng(1)
    others = random_feasible(3, 1, 1.5, 300, rng)
    assert book.sharpe >= max(sharpe(w, m.mean, m.cov) for w in others) - 1e-9


@pytest.mark.parametrize("seed", range(8))
def test_constrained_dominates_random(seed):
    rng = np.random.default_rng(seed)
    m = _random_moments(rng, 4)
    for budget in (0, 1):
        book = tangency_portfolio(m, 1e-5, budget, 1.5)
        assert abs(book.w.sum() - budget) <= 1e-8
        assert np.abs(book.w).sum() <= 1.5 + 1e-8
        hurdle = 1e-5
        best_random = max(sharpe(w, m.mean, m.cov, hurdle) for w in random_feasible(4, budget, 1.5, 300, rng))
        assert book.sharpe >= best_random - 1e-12


def _sharpe_gradient(w, mean, cov, hurdle):
    var = w @ cov @ w
    excess = w @ mean - hurdle
    return mean / np.sqrt(var) - excess * (cov @ w) / var ** 1.5


@pytest.mark.parametrize("seed", range(4))
def test_unconstrained_stationarity(seed):
    rng = np.random.default_rng(100 + seed)
    m = _random_moments(rng, 4)
    m = _m(np.abs(m.mean) + 0.001, m.cov)
    rf = 1e-5
    book = tangency_portfolio(m, rf, 1, np.inf)
    g = _sharpe_gradient(book.w, m.mean, m.cov, rf)
    h = 1e-6
    fd = np.array([(sharpe(book.w + h * e, m.mean, m.cov, rf) - sharpe(book.w - h * e, m.mean, m.cov, rf)) / (2 * h)
                   for e in np.eye(4)])
    np.testing.assert_allclose(fd, g, rtol=1e-4, atol=1e-8 * np.abs(g).max())
    # Sharpe is scale-free, so the gradient is orthogonal to w and vanishes on the budget plane
    projected = g - g.mean()
    assert np.abs(projected).max() <= 1e-8 * np.abs(g).max()


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_closed_form_scale_invariant(n, seed, c):
    rng = np.random.default_rng(seed)
    m = _random_moments(rng, n)
    # an uncapped budget-1 optimum exists only when V^-1 mean sums positive
    assume(np.linalg.solve(m.cov, m.mean).sum() > 0)
    a = tangency_portfolio(m, 0.0, 1, np.inf)
    b = tangency_portfolio(_m(m.mean, c * m.cov), 0.0, 1, np.inf)
    np.testing.assert_allclose(a.w, b.w, rtol=1e-10, atol=1e-10)


def _slices(n_months=4, n_assets=3, seed=0):
    return group_by_month(gaussian_panel(n_assets=n_assets, n_months=n_months, seed=seed))


def test_partition_two_months():
    slices = _slices(2)
    parts = partition_returns_by_state(slices, [1, 2])
    np.testing.assert_array_equal(parts[0], slices.block(0))
    np.testing.assert_array_equal(parts[1], slices.block(1))


def test_partition_empty_state():
    with pytest.raises(DegenerateStateError):
        partition_returns_by_state(_slices(3), [1, 1, 1], K=2)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=6, max_size=6))
def test_partition_covers_rows(labels):
    slices = _slices(6)
    parts = partition_returns_by_state(slices, labels, K=3, strict=False)
    stacked = np.vstack(parts)
    assert stacked.shape == slices.panel.returns.shape
    key = lambda a: sorted(map(tuple, a))  # noqa: E731
    assert key(stacked) == key(slices.panel.returns)


def test_state_matrix_prefers_long_short_when_better():
    rng = np.random.default_rng(4)
    # one asset rises, one falls: a zero-cost spread beats any fully invested book
    rows = np.column_stack([rng.normal(0.002, 0.01, 400), rng.normal(-0.002, 0.01, 400)])
    sw = state_weight_matrix([rows], rf=0.0)
    m = sample_mean_cov(rows)
    long_book = tangency_portfolio(m, 0.0, 1)
    short_book = tangency_portfolio(m, 0.0, 0)
    assert short_book.sharpe > long_book.sharpe
    assert sw.budgets[0] == 0
    np.testing.assert_allclose(sw.W[0], short_book.w)


def test_state_matrix_single_asset():
    rows = np.random.default_rng(0).normal(0.001, 0.01, size=(40, 1))
    sw = state_weight_matrix([rows], rf=0.0)
    np.testing.assert_array_equal(sw.W, [[1.0]])
    assert sw.budgets[0] == 1


def test_state_matrix_fallback():
    x = np.random.default_rng(0).normal(size=(30, 1))
    good = np.random.default_rng(1).normal(0.001, 0.01, size=(30, 3))
    # duplicated assets: singular without a ridge, and too large for the ridge to rescue
    for rows, ridge in ((np.hstack([x, x, 2 * x]) * 0.01, 0.0), (np.hstack([x, x, x]) * 1e3, 1e-10)):
        with pytest.warns(FallbackWarning, match="state 1"):
            sw = state_weight_matrix([rows, good], rf=0.0, ridge=ridge)
        np.testing.assert_allclose(sw.W[0], 1 / 3)
        assert sw.fallback.tolist() == [True, False]
        assert sw.budgets[0] == 1


def test_bull_state_is_net_long():
    panel, regimes = regime_switching_panel(n_years=4, mean=0.003, seed=3)
    slices = group_by_month(panel)
    parts = partition_returns_by_state(slices, regimes + 1, K=2)
    sw = state_weight_matrix(parts, rf=float(panel.rf.mean()))
    assert sw.W[0].sum() > 0.5


def test_two_state_blend():
    W = np.array([[0.2, 0.8, 0.0], [1.0, -0.5, 0.5]])
    out = markov_markowitz_weights(W, [1 / 3, 2 / 3])
    np.testing.assert_allclose(out, W[0] / 3 + 2 * W[1] / 3, atol=1e-15)


def test_one_hot_and_cancellation():
    W = np.array([[0.5, -0.5], [-0.5, 0.5]])
    np.testing.assert_array_equal(markov_markowitz_weights(W, [0.0, 1.0]), W[1])
    np.testing.assert_array_equal(markov_markowitz_weights(W, [0.5, 0.5]), [0.0, 0.0])
    with pytest.raises(ValueError):
        markov_markowitz_weights(W, [1.0])
    with pytest.raises(ValueError):
        markov_markowitz_weights(W, [0.7, 0.7])


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(2, 6), st.integers(0, 10_000))
def test_blend_linearity_and_bounds(K, n, seed):
    rng = np.random.default_rng(seed)
    W1 = rng.normal(size=(K, n))
    W2 = rng.normal(size=(K, n))
    p = rng.dirichlet(np.ones(K))
    q = rng.dirichlet(np.ones(K))
    a = rng.uniform()
    lhs = markov_markowitz_weights(W1 + W2, p)
    np.testing.assert_allclose(lhs, markov_markowitz_weights(W1, p) + markov_markowitz_weights(W2, p), atol=1e-14)
    mix = markov_markowitz_weights(W1, a * p + (1 - a) * q)
    np.testing.assert_allclose(mix, a * markov_markowitz_weights(W1, p) + (1 - a) * markov_markowitz_weights(W1, q),
                               atol=1e-14)
    budgets = rng.integers(0, 2, size=K)
    Wb = W1 - W1.mean(axis=1, keepdims=True) + budgets[:, None] / n
    sw = StateWeightMatrix(Wb, budgets, np.zeros(K), np.zeros(K, bool))
    out = markov_markowitz_weights(sw, p)
    assert abs(out.sum() - p @ budgets) <= 1e-12
    assert np.abs(out).sum() <= np.abs(Wb).sum(axis=1).max() + 1e-12


def test_portfolio_sharpe_zero_variance_is_nan():
    assert np.isnan(portfolio_sharpe([0.0, 0.0], np.array([0.1, 0.2]), np.eye(2)))
