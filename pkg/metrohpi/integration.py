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

"""Market integration measured by rolling factor-model R²."""

__all__ = [
    "CHARACTERISTICS",
    "PrewhitenResult",
    "IntegrationSeries",
    "IntegrationRecord",
    "IntegrationSummary",
    "IntegrationReport",
    "Averages",
    "prewhiten",
    "rolling_r2",
    "integration_report",
    "california_detail",
    "cohort_averages",
    "group_averages",
]

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    InsufficientObservations,
    RankDeficient,
    SeriesTooShort,
)
from .ingest import FactorPanel
from .linreg import ols_fit, time_trend_fit
from .panel import MsaMeta, QuarterId, ReturnPanel, Series

CHARACTERISTICS = ("mean_return", "sigma", "final_r2", "change_r2", "trend_t")

N_QUINTILES = 5


class PrewhitenResult(NamedTuple):
    residuals: Series
    constant: float
    rho: float
    constant_input: bool


def prewhiten(returns: Series) -> PrewhitenResult:
    """Remove first-order serial correlation with an AR(1) with intercept.

    Args:
      returns: return series, at least 8 quarters
    Returns:
      residuals (one quarter shorter, starting one quarter later) and the
      fitted AR(1) parameters
    Raises:
      SeriesTooShort: fewer than 8 observations
    """
    if len(returns) < 8:
        raise SeriesTooShort(returns.key, len(returns), 8)
    v = returns.values
    if np.ptp(v) == 0:
        logging.warning("%s: constant returns; prewhitened to zeros", returns.key)
        return PrewhitenResult(
            Series(returns.key, returns.start + 1, np.zeros(len(v) - 1)),
            float(v[0]),
            0.0,
            True,
        )
    X = np.column_stack([np.ones(len(v) - 1), v[:-1]])
    fit = ols_fit(X, v[1:], ("const", "lag1"))
    return PrewhitenResult(
        Series(returns.key, returns.start + 1, fit.residuals),
        float(fit.coefficients[0]),
        float(fit.coefficients[1]),
        False,
    )


@dataclass(frozen=True)
class IntegrationSeries:
    """Rolling R² of one MSA, each value dated at its window's last quarter."""

    msa_id: str
    r2_values: Series
    window_len: int
    final_r2: float
    change_r2: float
    trend_t: float
    missing: Tuple[QuarterId, ...] = ()

    @property
    def skipped(self) -> bool:
        return len(self.r2_values) == 0


def _span_statistics(
    r2: Series, span: Optional[Tuple[QuarterId, QuarterId]]
) -> Tuple[float, float, float]:
    if len(r2) and span is not None:
        r2 = r2.window(*span)
    values = r2.values[np.isfinite(r2.values)]
    if len(values) == 0:
        return math.nan, math.nan, math.nan
    final = float(values[-1])
    change = float(values[-1] - values[0])
    if len(values) >= 3:
        trend_t = time_trend_fit(values).slope_t_stat
    else:
        trend_t = math.nan
    return final, change, trend_t


def rolling_r2(
    returns: Series,
    factors: FactorPanel,
    window: int = 20,
    report_span: Optional[Tuple[QuarterId, QuarterId]] = None,
) -> IntegrationSeries:
    """R² of rolling regressions of returns on an intercept and the factors.

    Only windows where the return and every factor are present in all
    quarters are fitted.

    Args:
      returns: regressand (normally prewhitened returns)
      factors: factor panel
      window: window length in quarters
      report_span: span for the final, change and trend statistics;
        defaults to the full R² series
    Raises:
      InsufficientObservations: the window is not longer than the number
        of regressors plus one
    """
    n_params = len(factors) + 1
    if window <= n_params + 1:
        raise InsufficientObservations(window, n_params + 1)
    columns = [returns.to_pandas().rename("__y__")]
    columns.extend(factors.factors[k].to_pandas().rename(k) for k in factors.keys)
    frame = pd.concat(columns, axis=1)
    frame = frame.reindex(
        pd.RangeIndex(int(frame.index.min()), int(frame.index.max()) + 1)
    )
    complete = frame.notna().all(axis=1)
    full = complete.astype(int).rolling(window).sum() == window
    terminals = np.flatnonzero(full.to_numpy())
    if len(terminals) == 0:
        logging.warning("%s: no complete %d-quarter window", returns.key, window)
        empty = Series(returns.key, returns.start, np.empty(0))
        return IntegrationSeries(
            returns.key, empty, window, math.nan, math.nan, math.nan
        )

    y_all = frame["__y__"].to_numpy()
    X_all = np.column_stack(
        [np.ones(len(frame))] + [frame[k].to_numpy() for k in factors.keys]
    )
    names = ("const",) + factors.keys
    first = int(terminals[0])
    values = np.full(int(terminals[-1]) - first + 1, np.nan)
    missing: List[QuarterId] = []
    for end in terminals:
        rows = slice(end - window + 1, end + 1)
        try:
            fit = ols_fit(X_all[rows], y_all[rows], names)
        except RankDeficient as e:
            quarter = QuarterId(int(frame.index[end]))
            logging.warning("%s: window ending %s skipped: %s", returns.key, quarter, e)
            missing.append(quarter)
            continue
        values[end - first] = fit.r_squared
    r2 = Series(returns.key, QuarterId(int(frame.index[first])), values)
    final, change, trend_t = _span_statistics(r2, report_span)
    return IntegrationSeries(
        returns.key, r2, window, final, change, trend_t, tuple(missing)
    )


@dataclass
class IntegrationRecord:
    msa_id: str
    meta: MsaMeta
    mean_return: float
    sigma: float
    final_r2: float
    change_r2: float
    trend_t: float
    ranks: Dict[str, int] = field(default_factory=dict)
    quintiles: Dict[str, int] = field(default_factory=dict)

    def value(self, characteristic: str) -> float:
        return getattr(self, characteristic)


@dataclass(frozen=True)
class IntegrationSummary:
    """Cross-MSA distribution of one characteristic."""

    characteristic: str
    n: int
    mean: float
    std: float
    quintile_minima: Tuple[float, ...]
    maximum: float

    @property
    def minimum(self) -> float:
        return self.quintile_minima[0]


@dataclass
class IntegrationReport:
    records: List[IntegrationRecord]
    summaries: Dict[str, IntegrationSummary]
    series: Dict[str, IntegrationSeries]
    skipped: List[str]

    def record(self, msa_id: str) -> IntegrationRecord:
        for r in self.records:
            if r.msa_id == msa_id:
                return r
        raise KeyError(msa_id)


def quintile_bin(rank: int, n: int) -> int:
    """Quintile of rank among n MSAs, ceil(5 rank / n).

    With fewer than five MSAs each rank is its own quintile, so rank 1 is
    always in quintile 1.
    """
    if n < N_QUINTILES:
        return rank
    return -((-N_QUINTILES * rank) // n)



def _rank(values: Sequence[float]) -> List[int]:
    ranked = pd.Series(values, dtype=float).rank(method="first", na_option="bottom")
    return [int(r) for r in ranked]


def _summarize(
    characteristic: str, values: np.ndarray, quintiles: Sequence[int]
) -> IntegrationSummary:
    n = len(values)
    minima = []
    for q in range(1, N_QUINTILES + 1):
        members = [v for v, b in zip(values, quintiles) if b == q and np.isfinite(v)]
        minima.append(float(min(members)) if members else math.nan)
    finite = values[np.isfinite(values)]
    return IntegrationSummary(
        characteristic,
        n,
        float(finite.mean()) if len(finite) else math.nan,
        float(finite.std(ddof=1)) if len(finite) > 1 else math.nan,
        tuple(minima),
        float(finite.max()) if len(finite) else math.nan,
    )


def _assign_ranks(
    records: List[IntegrationRecord], prefix: str = ""
) -> Dict[str, IntegrationSummary]:
    summaries = {}
    n = len(records)
    for c in CHARACTERISTICS:
        values = np.array([r.value(c) for r in records], dtype=float)
        ranks = _rank(values)
        bins = [quintile_bin(rank, n) for rank in ranks]
        for r, rank, b in zip(records, ranks, bins):
            r.ranks[prefix + c] = rank
            r.quintiles[prefix + c] = b
        summaries[c] = _summarize(c, values, bins)
    return summaries


def integration_report(
    panel: ReturnPanel,
    factors: FactorPanel,
    report_span: Tuple[QuarterId, QuarterId],
    window: int = 20,
    prewhiten_returns: bool = True,
) -> IntegrationReport:
    """Per-MSA integration characteristics, ranks, quintiles and summaries.

    Ranks are 1-based ascending in MSA-id order for ties; the quintile of
    rank r among N MSAs is ceil(5 r / N), or r when N is below 5.

    Args:
      panel: raw returns
      factors: factor panel
      report_span: quarters summarized by mean, sigma, final and change
      window: rolling window length
      prewhiten_returns: regress prewhitened rather than raw returns
    Raises:
      DataError: no MSA has a complete first window
    """
    records: List[IntegrationRecord] = []
    series: Dict[str, IntegrationSeries] = {}
    skipped: List[str] = []
    for msa_id in panel.msa_ids:
        raw = panel[msa_id]
        try:
            regressand = prewhiten(raw).residuals if prewhiten_returns else raw
        except SeriesTooShort as e:
            logging.warning("%s: skipped: %s", msa_id, e)
            skipped.append(msa_id)
            continue
        s = rolling_r2(regressand, factors, window, report_span)
        if s.skipped or not np.isfinite(s.final_r2):
            skipped.append(msa_id)
            continue
        series[msa_id] = s
        in_span = raw.window(*report_span).values
        records.append(
            IntegrationRecord(
                msa_id,
                panel.metadata[msa_id],
                float(in_span.mean()) if len(in_span) else math.nan,
                float(in_span.std(ddof=1)) if len(in_span) > 1 else math.nan,
                s.final_r2,
                s.change_r2,
                s.trend_t,
            )
        )
    if not records:
        raise DataError("no MSA has a complete first rolling window")
    summaries = _assign_ranks(records)
    logging.info(
        "Integration: %d MSAs measured, %d skipped", len(records), len(skipped)
    )
    return IntegrationReport(records, summaries, series, skipped)


def california_detail(
    report: IntegrationReport,
) -> Tuple[List[IntegrationRecord], Dict[str, IntegrationSummary]]:
    """California records with within-California ranks and summaries.

    Returned records are copies carrying both the national ranks and
    ranks among California MSAs under "ca_" prefixed keys.
    """
    ca = [
        IntegrationRecord(
            r.msa_id,
            r.meta,
            r.mean_return,
            r.sigma,
            r.final_r2,
            r.change_r2,
            r.trend_t,
            dict(r.ranks),
            dict(r.quintiles),
        )
        for r in report.records
        if r.meta.state == "CA"
    ]
    if not ca:
        return [], {}
    summaries = _assign_ranks(ca, "ca_")
    return ca, summaries


class Averages(NamedTuple):
    series: Dict[str, Series]
    empty: List[str]


def _mean_series(
    name: str, members: Sequence[Series], start: Optional[QuarterId]
) -> Optional[Series]:
    frame = pd.concat([s.to_pandas() for s in members if len(s)], axis=1)
    mean = frame.mean(axis=1, skipna=True)
    if start is not None:
        mean = mean[mean.index >= start.ordinal]
    mean = mean.dropna()
    if len(mean) == 0:
        return None
    mean = mean.reindex(pd.RangeIndex(int(mean.index[0]), int(mean.index[-1]) + 1))
    return Series.from_pandas(name, mean)


def cohort_averages(
    series: Mapping[str, IntegrationSeries],
    cohort_starts: Sequence[QuarterId],
) -> Averages:
    """Mean R² of each cohort, from the cohort start onward.

    A cohort holds the MSAs whose R² series begins at or before the
    cohort start; cohorts are named cohort_1, cohort_2, ... in order.
    """
    result: Dict[str, Series] = {}
    empty: List[str] = []
    for i, start in enumerate(cohort_starts, 1):
        name = f"cohort_{i}"
        members = [
            series[k].r2_values
            for k in sorted(series)
            if not series[k].skipped and series[k].r2_values.start <= start
        ]
        mean = _mean_series(name, members, start) if members else None
        if mean is None:
            logging.warning("Cohort starting %s has no members; omitted", start)
            empty.append(name)
            continue
        result[name] = mean
    return Averages(result, empty)


GROUPINGS: Dict[str, Callable[[MsaMeta], str]] = {
    "national": lambda meta: "national",
    "california": lambda meta: "california" if meta.state == "CA" else "other",
    "coast_flag": lambda meta: meta.coast_flag.value,
    "census_division": lambda meta: meta.division_tag,
}


def group_averages(
    series: Mapping[str, IntegrationSeries],
    metadata: Mapping[str, MsaMeta],
    grouping: str,
    start: Optional[QuarterId] = None,
    groups: Optional[Sequence[str]] = None,
) -> Averages:
    """Mean R² per metadata group.

    Args:
      series: integration series by MSA
      metadata: MSA metadata
      grouping: one of national, california, coast_flag, census_division
      start: first quarter to emit
      groups: group labels to report (an absent one is listed as empty);
        defaults to the labels that occur
    """
    try:
        label = GROUPINGS[grouping]
    except KeyError:
        raise ValueError(f"unknown grouping {grouping!r}")
    members: Dict[str, List[Series]] = {}
    for msa_id in sorted(series):
        if series[msa_id].skipped:
            continue
        members.setdefault(label(metadata[msa_id]), []).append(series[msa_id].r2_values)
    wanted = list(groups) if groups is not None else sorted(members)
    result: Dict[str, Series] = {}
    empty: List[str] = []
    for g in wanted:
        mean = _mean_series(g, members[g], start) if g in members else None
        if mean is None:
            logging.warning("Group %s has no members; omitted", g)
            empty.append(g)
            continue
        result[g] = mean
    return Averages(result, empty)
