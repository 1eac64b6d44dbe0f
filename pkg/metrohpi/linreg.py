#!/usr/bin/python3
# Copyright (C) 2026 The metrohpi authors
# This file is a part of metrohpi.
#
# This program is free software; you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation; either version 2 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, write to the Free Software
# Foundation, Inc., 51 Franklin Street, Fifth Floor, Boston, MA 02110-1301 USA

"""Least squares fits and the statistics built on them."""

__all__ = [
    "RegressionFit",
    "TrendFit",
    "CochraneOrcuttResult",
    "ols_fit",
    "durbin_watson",
    "quasi_difference",
    "cochrane_orcutt",
    "time_trend_fit",
    "correlation_tstat",
    "corr_with_tstat",
    "mean_corr_tstat",
    "dw_lower_bound",
]

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import statsmodels.api as sm
from scipy import integrate, optimize
from statsmodels.stats.stattools import durbin_watson as _sm_durbin_watson

from .errors import (
    CochraneOrcuttDiverged,
    InsufficientObservations,
    NonStationaryResiduals,
    RankDeficient,
    UndefinedStatistic,
)

RANK_TOLERANCE = 1e-10

# Residual sum of squares below this fraction of the regressand's sum of
# squares counts as an exact fit.
EXACT_FIT_TOLERANCE = 1e-24


@dataclass(frozen=True, eq=False)
class RegressionFit:
    """Result of one least squares fit.

    t_stats hold +/-inf when the residual variance is zero and the
    coefficient is not; durbin_watson is NaN for an exact fit.
    """

    names: Tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    r_squared: float
    residuals: np.ndarray
    n_obs: int
    n_params: int
    durbin_watson: float

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def t_stat(self, name: str) -> float:
        return float(self.t_stats[self.names.index(name)])

    @property
    def ssr(self) -> float:
        return float(self.residuals @ self.residuals)


class TrendFit(NamedTuple):
    slope: float
    intercept: float
    slope_t_stat: float
    residuals: np.ndarray


class CochraneOrcuttResult(NamedTuple):
    rho: float
    fit: RegressionFit
    iterations: int


def _column_names(k: int, names: Optional[Sequence[str]]) -> Tuple[str, ...]:
    if names is None:
        return ("const",) + tuple(f"x{j}" for j in range(1, k))
    if len(names) != k:
        raise ValueError(f"{len(names)} names for {k} columns")
    return tuple(names)


def _check_rank(X: np.ndarray, names: Tuple[str, ...]) -> None:
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    if s[0] == 0:
        raise RankDeficient(names, math.inf)
    ratio = s[-1] / s[0]
    if ratio < RANK_TOLERANCE:
        null = vt[-1]
        dependent = [n for n, v in zip(names, null) if abs(v) > 1e-6]
        raise RankDeficient(dependent, 1.0 / ratio if ratio > 0 else math.inf)


def _exact_t_stats(coefficients: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(coefficients))))
    significant = np.abs(coefficients) > 1e-10 * scale
    return np.where(significant, np.copysign(np.inf, coefficients), 0.0)


def ols_fit(
    X: Union[np.ndarray, Sequence[Sequence[float]]],
    y: Union[np.ndarray, Sequence[float]],
    names: Optional[Sequence[str]] = None,
) -> RegressionFit:
    """Ordinary least squares with classical standard errors.

    Args:
      X: n x k design matrix; the first column is normally the intercept
      y: regressand of length n, in time order
      names: optional column names (defaults to const, x1, x2, ...)
    Returns:
      a RegressionFit
    Raises:
      InsufficientObservations: n <= k
      RankDeficient: the smallest to largest singular value ratio of X
        is below 1e-10
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, np.newaxis]
    n, k = X.shape
    if len(y) != n:
        raise ValueError(f"design has {n} rows but regressand has {len(y)}")
    column_names = _column_names(k, names)
    if n <= k:
        raise InsufficientObservations(n, k)
    _check_rank(X, column_names)

    results = sm.OLS(y, X).fit()
    coefficients = np.asarray(results.params, dtype=float)
    residuals = y - X @ coefficients
    ssr = float(residuals @ residuals)
    centered = y - y.mean()
    sst = float(centered @ centered)
    if sst > 0:
        r_squared = min(1.0, max(0.0, 1.0 - ssr / sst))
    else:
        r_squared = 0.0

    if ssr <= EXACT_FIT_TOLERANCE * max(1.0, float(y @ y)):
        std_errors = np.zeros(k)
        t_stats = _exact_t_stats(coefficients)
        dw = math.nan
        residuals = np.zeros(n)
    else:
        std_errors = np.asarray(results.bse, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_stats = np.where(std_errors > 0, coefficients / std_errors, 0.0)
        dw = float(_sm_durbin_watson(residuals))
    return RegressionFit(
        names=column_names,
        coefficients=coefficients,
        std_errors=std_errors,
        t_stats=t_stats,
        r_squared=r_squared,
        residuals=residuals,
        n_obs=n,
        n_params=k,
        durbin_watson=dw,
    )


def durbin_watson(residuals: Union[np.ndarray, Sequence[float]]) -> float:
    """Sum of squared successive residual differences over the residual sum of squares.

    Raises:
      UndefinedStatistic: fewer than two residuals, or all residuals zero
    """
    e = np.asarray(residuals, dtype=float)
    if len(e) < 2:
        raise UndefinedStatistic(f"Durbin-Watson needs two residuals, got {len(e)}")
    if not np.any(e):
        raise UndefinedStatistic("Durbin-Watson statistic of all-zero residuals")
    return float(_sm_durbin_watson(e))


def _lag_one_rho(e: np.ndarray) -> float:
    denominator = float(e[:-1] @ e[:-1])
    if denominator == 0:
        return 0.0
    return float(e[1:] @ e[:-1]) / denominator


def quasi_difference(
    X: np.ndarray, y: np.ndarray, rho: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Transform to (X_t - rho X_{t-1}, y_t - rho y_{t-1}), dropping t = 0."""
    return X[1:] - rho * X[:-1], y[1:] - rho * y[:-1]


def cochrane_orcutt(
    X: Union[np.ndarray, Sequence[Sequence[float]]],
    y: Union[np.ndarray, Sequence[float]],
    names: Optional[Sequence[str]] = None,
    rho: Optional[float] = None,
    max_iter: int = 50,
    tol: float = 1e-6,
) -> CochraneOrcuttResult:
    """Iterated Cochrane-Orcutt estimation for AR(1) errors.

    Every column of X is quasi-differenced, including the intercept, so
    the coefficients keep their meaning in the untransformed model.

    Args:
      X: design matrix (intercept first)
      y: regressand
      names: optional column names
      rho: use this autocorrelation instead of iterating
      max_iter: iteration limit
      tol: convergence tolerance on successive rho values
    Returns:
      rho, the fit on the quasi-differenced data and the iteration count
    Raises:
      InsufficientObservations: n <= k + 1
      NonStationaryResiduals: an iterate has |rho| >= 1
      CochraneOrcuttDiverged: no convergence within max_iter iterations
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, np.newaxis]
    n, k = X.shape
    if n <= k + 1:
        raise InsufficientObservations(n - 1, k)

    if rho is not None:
        if abs(rho) >= 1:
            raise NonStationaryResiduals(rho)
        Xs, ys = quasi_difference(X, y, rho)
        return CochraneOrcuttResult(float(rho), ols_fit(Xs, ys, names), 0)

    fit = ols_fit(X, y, names)
    current = _lag_one_rho(y - X @ fit.coefficients)
    for iteration in range(1, max_iter + 1):
        if abs(current) >= 1:
            raise NonStationaryResiduals(current)
        Xs, ys = quasi_difference(X, y, current)
        fit = ols_fit(Xs, ys, names)
        updated = _lag_one_rho(y - X @ fit.coefficients)
        logging.debug("Cochrane-Orcutt iteration %d: rho %.8f", iteration, updated)
        if abs(updated - current) < tol:
            if abs(updated) >= 1:
                raise NonStationaryResiduals(updated)
            Xs, ys = quasi_difference(X, y, updated)
            return CochraneOrcuttResult(updated, ols_fit(Xs, ys, names), iteration)
        current = updated
    raise CochraneOrcuttDiverged(current, max_iter)


def time_trend_fit(values: Union[np.ndarray, Sequence[float]]) -> TrendFit:
    """Regress values on an intercept and t = 0..n-1.

    A constant series gets slope 0 and slope t-statistic 0.
    """
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        raise InsufficientObservations(len(v), 3)
    if np.ptp(v) == 0:
        return TrendFit(0.0, float(v[0]), 0.0, np.zeros(len(v)))
    t = np.arange(len(v), dtype=float)
    fit = ols_fit(np.column_stack([np.ones(len(v)), t]), v, ("const", "trend"))
    return TrendFit(
        float(fit.coefficients[1]),
        float(fit.coefficients[0]),
        float(fit.t_stats[1]),
        fit.residuals,
    )


def correlation_tstat(r, n):
    """t = r sqrt(n - 2) / sqrt(1 - r^2), with +/-inf when |r| = 1.

    Accepts scalars or arrays.
    """
    r_arr = np.asarray(r, dtype=float)
    n_arr = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = r_arr * np.sqrt(n_arr - 2) / np.sqrt(1 - r_arr * r_arr)
    t = np.where(np.abs(r_arr) >= 1, np.copysign(np.inf, r_arr), t)
    if t.ndim == 0:
        return float(t)
    return t


def corr_with_tstat(
    x: Union[np.ndarray, Sequence[float]], y: Union[np.ndarray, Sequence[float]]
) -> Tuple[float, float]:
    """Pearson correlation of x and y and its t-statistic.

    Raises:
      UndefinedStatistic: fewer than three observations or a constant input
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("correlation of series with different lengths")
    n = len(x)
    if n < 3:
        raise UndefinedStatistic(f"correlation needs three observations, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedStatistic("correlation with a zero-variance series")
    r = float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))
    return r, correlation_tstat(r, n)


def mean_corr_tstat(mean: float, sigma: float, n: int) -> float:
    """t-statistic of a mean correlation: mean / (sigma / sqrt(n))."""
    if not sigma > 0:
        raise UndefinedStatistic(f"cross-coefficient sigma {sigma!r} is not positive")
    if n < 2:
        raise UndefinedStatistic(f"mean correlation t needs two coefficients, got {n}")
    return mean / (sigma / math.sqrt(n))


def _imhof_cdf_below_zero(weights: np.ndarray) -> float:
    # P(sum_j w_j chi2_1 < 0) by inversion of the characteristic function.
    def integrand(u: float) -> float:
        if u == 0:
            return 0.5 * float(weights.sum())
        wu = weights * u
        theta = 0.5 * float(np.arctan(wu).sum())
        log_rho = 0.25 * float(np.log1p(wu * wu).sum())
        return math.sin(theta) / (u * math.exp(log_rho))

    value, _ = integrate.quad(integrand, 0, np.inf, limit=500)
    return 0.5 - value / math.pi


@lru_cache(maxsize=None)
def dw_lower_bound(n: int, k: int, alpha: float = 0.05) -> float:
    """Lower critical value d_L of the Durbin-Watson statistic.

    Computed from the exact lower-bounding distribution rather than a
    printed table.

    Args:
      n: number of observations
      k: number of regressors, including the intercept
      alpha: significance level of the one-sided test for positive
        autocorrelation
    """
    if k < 1 or n - k < 1:
        raise InsufficientObservations(n, k)
    j = np.arange(1, n - k + 1)
    eigenvalues = 2.0 * (1.0 - np.cos(np.pi * j / n))
    lo, hi = float(eigenvalues[0]), float(eigenvalues[-1])
    if hi - lo < 1e-12:
        return lo

    def excess(d: float) -> float:
        return _imhof_cdf_below_zero(eigenvalues - d) - alpha

    span = hi - lo
    return float(optimize.brentq(excess, lo + 1e-9 * span, hi - 1e-9 * span, xtol=1e-10))
