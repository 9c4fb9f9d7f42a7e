"""Sample moments and closed-form efficient-frontier coefficients.

For a mean vector ``r`` and covariance ``V`` the frontier of fully invested
portfolios is

    sigma^2(target) = (A target^2 - 2 B target + C) / (A C - B^2)

with ``A = e'V^-1 e``, ``B = r'V^-1 e`` and ``C = r'V^-1 r``. The same curve
written around its vertex uses ``r_mvp = B/A``, ``sigma_mvp = 1/sqrt(A)`` and
the curvature rate ``u = sqrt((A C - B^2)/A)``:

    sigma^2(target) = ((target - r_mvp) / u)^2 + sigma_mvp^2
"""

from __future__ import annotations

import warnings
from dataclasses import astuple, dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .data import MonthlySlices, ReturnPanel, format_month, group_by_month
from .exceptions import (
    DegenerateFrontierError,
    DegenerateMonthError,
    DimensionalityWarning,
    MarkovMarkowitzError,
    NumericalConsistencyError,
)
from .validation import as_return_panel

DEFAULT_RIDGE = 1e-10
# AC - B^2 below -CONSISTENCY_TOL signals a bad inverse; above it is clamped.
CONSISTENCY_TOL = 1e-12
COEFFICIENT_COLUMNS = ("A", "B", "C", "r_mvp", "sigma_mvp", "u")
INTERPRETABLE_COLUMNS = ("r_mvp", "sigma_mvp", "u")


@dataclass(frozen=True)
class SampleMoments:
    mean: np.ndarray
    cov: np.ndarray
    n_obs: int
    ridge_applied: bool = False


def is_invertible(cov: np.ndarray) -> bool:
    if not np.all(np.isfinite(cov)):
        return False
    return np.linalg.cond(cov) < 1.0 / np.finfo(float).eps


def sample_mean_cov(rows, ridge: float = DEFAULT_RIDGE) -> SampleMoments:
    """Mean and unbiased covariance of daily return rows.

    ``ridge`` is added to the diagonal only when the sample covariance is not
    invertible at double precision.
    """
    x = np.asarray(rows, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise DegenerateMonthError(f"need at least 2 rows for a covariance, got {x.shape[0]}")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    cov = 0.5 * (cov + cov.T)
    applied = False
    if not is_invertible(cov) and ridge > 0:
        cov = cov + ridge * np.eye(cov.shape[0])
        applied = True
    return SampleMoments(mean, cov, x.shape[0], applied)


@dataclass(frozen=True)
class EfCoefficients:
    A: float
    B: float
    C: float
    r_mvp: float
    sigma_mvp: float
    u: float

    @classmethod
    def from_raw(cls, A: float, B: float, C: float) -> "EfCoefficients":
        return cls(A, B, C, *ef_interpretable(A, B, C))

    @property
    def discriminant(self) -> float:
        """``A C - B^2``."""
        return self.A * self.C - self.B * self.B

    def as_tuple(self) -> tuple[float, ...]:
        return astuple(self)


def ef_raw_coefficients(m: SampleMoments) -> tuple[float, float, float]:
    """Merton's ``(A, B, C)`` via linear solves against ``V``."""
    cov = np.atleast_2d(m.cov)
    mean = np.atleast_1d(m.mean)
    if not np.any(mean):
        raise DegenerateFrontierError("mean return vector is exactly zero; C = 0")
    e = np.ones_like(mean)
    solved = np.linalg.solve(cov, np.column_stack([e, mean]))
    A = float(e @ solved[:, 0])
    B = float(mean @ solved[:, 0])
    C = float(mean @ solved[:, 1])
    if not (A > 0) or C < 0:
        raise NumericalConsistencyError(f"inverse covariance not positive definite (A={A!r}, C={C!r})")
    return A, B, C


def ef_interpretable(A: float, B: float, C: float) -> tuple[float, float, float]:
    """Vertex and curvature form: ``(r_mvp, sigma_mvp, u)``.

    ``AC - B^2`` is non-negative in exact arithmetic. Negative values down to
    ``-1e-12`` times ``max(1, AC)`` are rounding noise and are clamped to 0;
    anything below raises.
    """
    if not (A > 0):
        raise NumericalConsistencyError(f"A must be positive, got {A!r}")
    disc = A * C - B * B
    if disc < -CONSISTENCY_TOL * max(1.0, A * C):
        raise NumericalConsistencyError(f"AC - B^2 = {disc!r} is negative")
    disc = max(disc, 0.0)
    return B / A, 1.0 / np.sqrt(A), float(np.sqrt(disc / A))


def ef_variance_at(target, c: EfCoefficients, form: str = "abc"):
    """Frontier variance at ``target`` return.

    ``form="abc"`` evaluates the ratio of quadratics; ``form="vertex"``
    evaluates the interpretable parabola. Both need a non-degenerate frontier.
    """
    target = np.asarray(target, dtype=float)
    if form == "abc":
        disc = c.discriminant
        if disc <= 0:
            raise DegenerateFrontierError("AC - B^2 = 0: the frontier is a straight line")
        out = (c.A * target**2 - 2.0 * c.B * target + c.C) / disc
    elif form == "vertex":
        if c.u <= 0:
            raise DegenerateFrontierError("u = 0: the frontier is a straight line")
        out = ((target - c.r_mvp) / c.u) ** 2 + c.sigma_mvp**2
    else:
        raise ValueError(f"unknown form {form!r}")
    return out if out.ndim else float(out)


def frontier_coefficients(rows, ridge: float = DEFAULT_RIDGE) -> EfCoefficients:
    return EfCoefficients.from_raw(*ef_raw_coefficients(sample_mean_cov(rows, ridge)))


@dataclass(frozen=True)
class EfCoefficientSeries:
    months: list[tuple[int, int]]
    coeffs: list[EfCoefficients]

    def __len__(self) -> int:
        return len(self.months)

    def interpretable(self) -> np.ndarray:
        """``T x 3`` array of ``(r_mvp, sigma_mvp, u)`` per month."""
        return np.array([(c.r_mvp, c.sigma_mvp, c.u) for c in self.coeffs], dtype=float).reshape(-1, 3)

    def to_frame(self) -> pd.DataFrame:
        index = pd.PeriodIndex([pd.Period(year=y, month=m, freq="M") for y, m in self.months], name="month")
        return pd.DataFrame([c.as_tuple() for c in self.coeffs], index=index, columns=list(COEFFICIENT_COLUMNS))


def monthly_coefficients(slices: MonthlySlices, ridge: float = DEFAULT_RIDGE) -> EfCoefficientSeries:
    """One coefficient set per month from that month's daily rows only."""
    coeffs = []
    n_assets = slices.panel.n_assets
    for month, block in slices:
        if n_assets >= block.shape[0]:
            warnings.warn(
                f"{format_month(month)}: {n_assets} assets vs {block.shape[0]} daily rows; "
                "the monthly covariance is singular or badly estimated",
                DimensionalityWarning, stacklevel=2,
            )
        try:
            coeffs.append(frontier_coefficients(block, ridge))
        except (MarkovMarkowitzError, np.linalg.LinAlgError) as exc:
            raise type(exc)(f"{format_month(month)}: {exc}") from exc
    return EfCoefficientSeries(list(slices.months), coeffs)


class EfficientFrontierCoefficients(TransformerMixin, BaseEstimator):
    """Transform daily returns into monthly efficient-frontier coefficients.

    Parameters
    ----------
    ridge : float
        Diagonal load applied only to monthly covariances that are singular
        at working precision.
    interpretable_only : bool
        Return only ``r_mvp, sigma_mvp, u`` instead of all six columns.

    The transformer is stateless; ``fit`` only records the input width.
    """

    def __init__(self, ridge=DEFAULT_RIDGE, interpretable_only=False):
        self.ridge = ridge
        self.interpretable_only = interpretable_only

    def fit(self, X, y=None):
        panel = as_return_panel(X)
        self.n_features_in_ = panel.n_assets
        self.feature_names_in_ = np.array(panel.tickers, dtype=object)
        return self

    def transform(self, X):
        panel = as_return_panel(X)
        series = monthly_coefficients(group_by_month(panel), self.ridge)
        frame = series.to_frame()
        if self.interpretable_only:
            frame = frame.loc[:, list(INTERPRETABLE_COLUMNS)]
        return frame

    def get_feature_names_out(self, input_features=None):
        cols = INTERPRETABLE_COLUMNS if self.interpretable_only else COEFFICIENT_COLUMNS
        return np.array(cols, dtype=object)
