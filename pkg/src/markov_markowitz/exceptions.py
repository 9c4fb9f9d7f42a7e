"""Exception and warning types raised across the package."""


class MarkovMarkowitzError(Exception):
    """Base class for all package errors."""


class DataParseError(MarkovMarkowitzError, ValueError):
    """A delimited input file could not be parsed.

    Carries the 1-based ``line`` number of the offending row when known.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}"
        if line is not None:
            prefix += f":{line}" if prefix else f"line {line}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DataValidationError(MarkovMarkowitzError, ValueError):
    """Input data violates a content rule (positivity, duplicates, ...)."""


class CoverageError(MarkovMarkowitzError, ValueError):
    """The risk-free series does not cover the return dates."""


class DegenerateMonthError(MarkovMarkowitzError, ValueError):
    """A calendar month holds fewer than two daily return rows."""


class DegenerateFrontierError(MarkovMarkowitzError, ValueError):
    """Frontier coefficients are undefined (zero mean vector, AC == B**2)."""


class NumericalConsistencyError(MarkovMarkowitzError, ArithmeticError):
    """Computed quantities violate an identity beyond round-off."""


class DegenerateStateError(MarkovMarkowitzError, ValueError):
    """A market state holds too few daily rows to estimate moments."""


class InfeasiblePortfolioError(MarkovMarkowitzError, ValueError):
    """No portfolio satisfies the budget and gross-exposure constraints."""


class ReducibleChainError(MarkovMarkowitzError, ArithmeticError):
    """Power iteration on a transition matrix failed to converge.

    ``last_iterate`` holds the final probability vector.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DegenerateSeriesError(MarkovMarkowitzError, ValueError):
    """A return series has zero dispersion where a ratio needs it."""


class BacktestError(MarkovMarkowitzError, RuntimeError):
    """An online backtest iteration failed; ``month`` names the test month."""

    def __init__(self, message, month=None):
        super().__init__(message)
        self.month = month


class DimensionalityWarning(UserWarning):
    """Asset count is large relative to the daily rows in a month."""


class NonPositiveExcessWarning(UserWarning):
    """No feasible portfolio earns a positive excess return."""


class FallbackWarning(UserWarning):
    """A degenerate computation fell back to a default (equal weights, rho=0)."""
