"""Augmented Dickey-Fuller test tuned for cointegration-residual inputs.

The regression omits deterministic terms (a cointegrating regression already
removed the mean), the lag order is chosen by minimum AIC up to `max_lag`,
and p-values come from MacKinnon's response surface for the residual-based
two-variable Engle-Granger distribution, not the plain Dickey-Fuller one.

Surface and critical-value coefficients are from MacKinnon (1994, 2010),
"Critical Values for Cointegration Tests", two I(1) series, constant-only
cointegrating regression.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import ConstantSeries, InsufficientLength, NumericalSingularity

# p-value surface: p = Phi(poly(tau)), spliced at TAU_STAR, clamped outside
# [TAU_MIN, TAU_MAX].
TAU_MIN = -18.86
TAU_MAX = 0.92
TAU_STAR = -2.62
SMALLP_COEF = (2.92, 1.5012, 0.039796)
LARGEP_COEF = (2.1945, 0.64695, -0.29198, -0.042377)

# Finite-sample critical values: stat_about(T) = b0 + b1/T + b2/T^2.
CRIT_COEF = {
    0.01: (-3.89644, -10.9519, -33.527),
    0.05: (-3.33613, -6.1101, -6.823),
    0.10: (-3.04445, -4.2412, -2.72),
}


class AdfResult(NamedTuple):
    statistic: float
    p_value: float
    lag: int


def default_max_lag(n_obs: int) -> int:
    """Schwert rule-of-thumb lag ceiling, floor(12 * (T/100)^0.25)."""
    return int(12.0 * (n_obs / 100.0) ** 0.25)


def residual_pvalue(statistic: float) -> float:
    """Two-variable Engle-Granger residual p-value for an ADF statistic."""
    if statistic > TAU_MAX:
        return 1.0
    if statistic < TAU_MIN:
        return 0.0
    coef = SMALLP_COEF if statistic <= TAU_STAR else LARGEP_COEF
    z = 0.0
    for power, c in enumerate(coef):
        z += c * statistic**power
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def residual_critical_value(level: float, n_obs: int) -> float:
    """Finite-sample critical value at `level` in {0.01, 0.05, 0.10}."""
    try:
        b0, b1, b2 = CRIT_COEF[level]
    except KeyError:
        raise ValueError(f"no critical-value surface for level {level}")
    return b0 + b1 / n_obs + b2 / n_obs**2


def _design_matrix(x: np.ndarray, lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Regressand (differences) and regressors (level, lagged differences)."""
    dx = np.diff(x)
    n = len(dx) - lag
    y = dx[lag:]
    cols = [x[lag:-1]]
    for k in range(1, lag + 1):
        cols.append(dx[lag - k : lag - k + n])
    return y, np.column_stack(cols)


def _ols_ssr(y: np.ndarray, X: np.ndarray) -> float:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return float(resid @ resid)


def adf_test(series, max_lag: int | None = None) -> AdfResult:
    """ADF statistic and residual-distribution p-value for one series.

    Regresses the first difference on the lagged level and `k` lagged
    differences with no constant or trend, picking k in [0, max_lag] by
    minimum AIC on a common sample, then re-estimating on the longest
    sample the chosen lag allows.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = len(x)
    if max_lag is None:
        max_lag = default_max_lag(n)
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    if n < max_lag + 10:
        raise InsufficientLength(f"need >= {max_lag + 10} observations, got {n}")
    if np.ptp(x) == 0.0:
        raise ConstantSeries("series is constant")

    # Lag selection: same sample for every candidate so AICs are comparable.
    y, X = _design_matrix(x, max_lag)
    n_sel = len(y)
    best_lag, best_aic = 0, math.inf
    for k in range(0, max_lag + 1):
        ssr = _ols_ssr(y, X[:, : k + 1])
        if ssr <= 0.0:
            aic = -math.inf
        else:
            aic = n_sel * math.log(ssr / n_sel) + 2.0 * (k + 1)
        if aic < best_aic:
            best_aic, best_lag = aic, k

    y, X = _design_matrix(x, best_lag)
    n_fit, n_param = X.shape
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < n_param:
        raise NumericalSingularity("ADF design matrix is rank deficient")
    resid = y - X @ beta
    ssr = float(resid @ resid)
    dof = n_fit - n_param
    if dof <= 0 or ssr <= 0.0:
        raise NumericalSingularity("degenerate ADF regression")
    sigma2 = ssr / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se0 = math.sqrt(sigma2 * xtx_inv[0, 0])
    stat = float(beta[0] / se0)
    return AdfResult(statistic=stat, p_value=residual_pvalue(stat), lag=best_lag)
