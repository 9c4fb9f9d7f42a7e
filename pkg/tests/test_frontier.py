import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from markov_markowitz.data import ReturnPanel, group_by_month
from markov_markowitz.exceptions import (
    DegenerateFrontierError,
    DegenerateMonthError,
    DimensionalityWarning,
    NumericalConsistencyError,
)
from markov_markowitz.frontier import (
    EfCoefficients,
    EfficientFrontierCoefficients,
    SampleMoments,
    ef_interpretable,
    ef_raw_coefficients,
    ef_variance_at,
    frontier_coefficients,
    monthly_coefficients,
    sample_mean_cov,
)
from markov_markowitz.synthetic import gaussian_panel

from oracles import covariance_double_loop, kkt_min_variance, min_variance_portfolio


def _moments(mean, cov):
    return SampleMoments(np.asarray(mean, float), np.asarray(cov, float), 10, False)


def test_two_point_variance():
    m = sample_mean_cov([[0.01], [0.03]])
    assert m.mean[0] == pytest.approx(0.02, abs=1e-15)
    assert m.cov[0, 0] == pytest.approx(0.0002, abs=1e-15)
    assert m.n_obs == 2


def test_identical_assets_get_ridge():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(21, 1))
    m = sample_mean_cov(np.hstack([x, x]))
    assert m.ridge_applied
    np.linalg.cholesky(m.cov)


def test_one_row_rejected():
    with pytest.raises(DegenerateMonthError):
        sample_mean_cov([[0.1, 0.2]])


def test_covariance_matches_double_loop():
    rows = np.random.default_rng(3).normal(size=(21, 5))
    m = sample_mean_cov(rows)
    mean, cov = covariance_double_loop(rows)
    np.testing.assert_allclose(m.mean, mean, atol=1e-12)
    np.testing.assert_allclose(m.cov, cov, atol=1e-12)
    assert not m.ridge_applied


@pytest.mark.parametrize("scale, expected", [(1.0, (2.0, 0.4, 0.1)), (2.0, (1.0, 0.2, 0.05))])
def test_raw_coefficients_scalar_cov(scale, expected):
    A, B, C = ef_raw_coefficients(_moments([0.1, 0.3], scale * np.eye(2)))
    np.testing.assert_allclose((A, B, C), expected, atol=1e-15)


def test_raw_coefficients_linear_solve_oracle():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(4, 4))
    cov = X @ X.T + 0.1 * np.eye(4)
    mean = rng.normal(size=4)
    A, B, C = ef_raw_coefficients(_moments(mean, cov))
    x_e = np.linalg.solve(cov, np.ones(4))
    x_r = np.linalg.solve(cov, mean)
    np.testing.assert_allclose((A, B, C), (np.ones(4) @ x_e, mean @ x_e, mean @ x_r), rtol=1e-12)


def test_zero_mean_is_degenerate():
    with pytest.raises(DegenerateFrontierError):
        ef_raw_coefficients(_moments([0.0, 0.0], np.eye(2)))


def test_interpretable_identity_case():
    r_mvp, sigma, u = ef_interpretable(2.0, 0.4, 0.1)
    assert r_mvp == pytest.approx(0.2, abs=1e-15)
    assert sigma == pytest.approx(0.70711, abs=1e-5)
    assert u == pytest.approx(0.14142, abs=1e-5)


def test_interpretable_edge_cases():
    r_mvp, _, u = ef_interpretable(2.0, 0.0, 0.3)
    assert r_mvp == 0.0
    assert u == pytest.approx(np.sqrt(0.3), abs=1e-15)
    assert ef_interpretable(1.0, 2.0, 4.0)[2] == 0.0
    # tiny negative discriminants are rounding noise
    assert ef_interpretable(1.0, 2.0, 4.0 - 5e-13)[2] == 0.0
    with pytest.raises(NumericalConsistencyError):
        ef_interpretable(1.0, 2.0, 3.0)
    # the noise allowance scales with AC when the coefficients are huge
    assert ef_interpretable(2e10, 3e13, 4.5e16 - 1.0)[2] == 0.0


def test_ridged_collinear_month_is_finite():
    # two rows, two assets: e lies in the null space of the sample covariance
    c = frontier_coefficients([[0.01, 0.02], [0.02, 0.01]])
    assert np.isfinite(c.as_tuple()).all()
    assert c.u >= 0


def test_variance_at_vertex_and_off_vertex():
    c = EfCoefficients.from_raw(2.0, 0.4, 0.1)
    assert ef_variance_at(0.2, c) == pytest.approx(0.5, abs=1e-12)
    assert ef_variance_at(0.3, c) == pytest.approx(1.0, abs=1e-12)
    assert ef_variance_at(0.3, c, form="vertex") == pytest.approx(1.0, abs=1e-12)


def test_variance_at_degenerate():
    with pytest.raises(DegenerateFrontierError):
        ef_variance_at(0.1, EfCoefficients.from_raw(1.0, 2.0, 4.0))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000))
def test_two_forms_agree(n, seed):
    rng = np.random.default_rng(seed)
    rows = rng.normal(0.001, 0.01, size=(30, n))
    c = frontier_coefficients(rows)
    if c.u == 0:
        return
    grid = np.linspace(c.r_mvp - 3 * c.u * c.sigma_mvp, c.r_mvp + 3 * c.u * c.sigma_mvp, 9)
    np.testing.assert_allclose(ef_variance_at(grid, c), ef_variance_at(grid, c, "vertex"), rtol=1e-9, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_covariance_scaling(n, seed, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n))
    cov = X @ X.T + 0.5 * np.eye(n)
    mean = rng.normal(size=n)
    base = EfCoefficients.from_raw(*ef_raw_coefficients(_moments(mean, cov)))
    scaled = EfCoefficients.from_raw(*ef_raw_coefficients(_moments(mean, k * cov)))
    np.testing.assert_allclose((scaled.A, scaled.B, scaled.C), np.array((base.A, base.B, base.C)) / k, rtol=1e-9)
    assert scaled.r_mvp == pytest.approx(base.r_mvp, rel=1e-9, abs=1e-12)
    assert scaled.sigma_mvp == pytest.approx(base.sigma_mvp * np.sqrt(k), rel=1e-9)
    assert scaled.u == pytest.approx(base.u / np.sqrt(k), rel=1e-7, abs=1e-12)


def test_frontier_matches_kkt_and_mvp():
    rng = np.random.default_rng(21)
    rows = rng.normal(0.0005, 0.01, size=(30, 4))
    m = sample_mean_cov(rows)
    c = frontier_coefficients(rows)
    for r in np.linspace(-0.01, 0.01, 7):
        _, var = kkt_min_variance(m.cov, m.mean, r)
        assert abs(ef_variance_at(r, c) - var) <= 1e-8
    w = min_variance_portfolio(m.cov)
    assert abs(w @ m.mean - c.r_mvp) <= 1e-10
    assert abs(np.sqrt(w @ m.cov @ w) - c.sigma_mvp) <= 1e-10


def test_monthly_coefficients_composition():
    panel = gaussian_panel(n_assets=3, n_months=2, seed=4)
    slices = group_by_month(panel)
    series = monthly_coefficients(slices)
    assert len(series) == 2
    for i, (_, block) in enumerate(slices):
        assert series.coeffs[i] == frontier_coefficients(block)
    frame = series.to_frame()
    assert list(frame.columns) == ["A", "B", "C", "r_mvp", "sigma_mvp", "u"]
    assert str(frame.index[0]) == "2000-01"


def test_monthly_coefficients_dimensionality_warning():
    panel = gaussian_panel(n_assets=25, n_months=1, seed=2)
    with pytest.warns(DimensionalityWarning):
        series = monthly_coefficients(group_by_month(panel))
    assert len(series) == 1


def test_monthly_error_tagged_with_month():
    dates = np.array(["2000-01-03", "2000-01-04", "2000-01-05", "2000-02-01", "2000-02-02"],
                     dtype="datetime64[D]")
    rets = np.array([[0.01, 0.02], [0.02, 0.01], [0.03, -0.01], [0.0, 0.0], [0.0, 0.0]])
    panel = ReturnPanel(dates, ("a", "b"), rets, np.zeros(5))
    with pytest.raises(DegenerateFrontierError, match="2000-02"), pytest.warns(DimensionalityWarning):
        monthly_coefficients(group_by_month(panel))


def test_transformer_api():
    panel = gaussian_panel(n_assets=3, n_months=4, seed=1)
    est = EfficientFrontierCoefficients(interpretable_only=True)
    out = est.fit_transform(panel.to_frame())
    assert out.shape == (4, 3)
    assert list(est.get_feature_names_out()) == ["r_mvp", "sigma_mvp", "u"]
    assert est.get_params() == {"interpretable_only": True, "ridge": 1e-10}
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        EfficientFrontierCoefficients().fit(panel).transform(panel)
