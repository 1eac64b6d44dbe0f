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

"""Jump detection with bipower variation."""

__all__ = [
    "LM_SCALE",
    "BipowerState",
    "JumpSeries",
    "bipower_variation",
    "lm_statistic",
    "classify_jumps",
    "classify_panel",
    "jump_incidence",
]

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import SeriesTooShort, UndefinedStatistic
from .panel import QuarterId, ReturnPanel, Series

LM_SCALE = math.sqrt(2.0 / math.pi)

DEFAULT_THRESHOLDS = (1.65, 2.0)


def bipower_variation(returns: Union[np.ndarray, Sequence[float]]) -> float:
    """Mean product of adjacent absolute returns.

    Raises:
      SeriesTooShort: fewer than two returns
    """
    r = np.abs(np.asarray(returns, dtype=float))
    if len(r) < 2:
        raise SeriesTooShort("bipower history", len(r), 2)
    return float(np.sum(r[1:] * r[:-1]) / (len(r) - 1))


@dataclass
class BipowerState:
    """Running bipower variation over an expanding history."""

    window_values: list
    b_value: float
    t_k: int

    @classmethod
    def start(cls, history: Sequence[float]) -> "BipowerState":
        values = [float(v) for v in history]
        return cls(values, bipower_variation(values), len(values))

    def extend(self, value: float) -> None:
        total = self.b_value * (self.t_k - 1)
        total += abs(self.window_values[-1]) * abs(value)
        self.window_values.append(float(value))
        self.t_k += 1
        self.b_value = total / (self.t_k - 1)


def lm_statistic(
    return_next: float,
    history: Union[np.ndarray, Sequence[float]],
    scaled: bool = True,
) -> float:
    """Return over the square root of the bipower variation of prior returns.

    Args:
      return_next: tested return
      history: strictly earlier returns
      scaled: multiply by sqrt(2/pi) so the statistic is unit normal
    Raises:
      UndefinedStatistic: the history has zero bipower variation
    """
    b = bipower_variation(history)
    if b == 0:
        raise UndefinedStatistic("zero bipower variation in the history")
    lm = return_next / math.sqrt(b)
    return lm * LM_SCALE if scaled else lm


@dataclass(frozen=True)
class JumpSeries:
    """LM statistics of one MSA with the two threshold flags.

    lm_values is NaN where the history had zero bipower variation; the
    flags are False there.
    """

    msa_id: str
    lm_values: Series
    jump_10pct: np.ndarray
    jump_big: np.ndarray
    min_history: int
    missing: Tuple[QuarterId, ...] = ()

    def flags(self, tag: str) -> np.ndarray:
        if tag not in ("jump_10pct", "jump_big"):
            raise ValueError(f"unknown jump flag {tag!r}")
        return getattr(self, tag)

    def censored(self, gate: float = 2.0) -> Series:
        """LM where |LM| exceeds gate, zero elsewhere (NaN stays NaN)."""
        lm = self.lm_values.values
        with np.errstate(invalid="ignore"):
            values = np.where(np.abs(lm) > gate, lm, 0.0)
        values[np.isnan(lm)] = np.nan
        return Series(self.msa_id, self.lm_values.start, values)


def classify_jumps(
    returns: Series,
    min_history: int = 8,
    thresholds: Tuple[float, float] = DEFAULT_THRESHOLDS,
    scaled: bool = True,
) -> JumpSeries:
    """LM statistic and jump flags for every quarter after min_history.

    The history of the return at position t is every return before it.

    Raises:
      SeriesTooShort: fewer than min_history + 1 returns
    """
    if min_history < 2:
        raise ValueError("min_history must be at least 2")
    v = returns.values
    if len(v) < min_history + 1:
        raise SeriesTooShort(returns.key, len(v), min_history + 1)
    products = np.abs(v[1:]) * np.abs(v[:-1])
    cumulative = np.cumsum(products)
    t = np.arange(min_history, len(v))
    bipower = cumulative[t - 2] / (t - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lm = np.where(bipower > 0, v[t] / np.sqrt(bipower), np.nan)
    if scaled:
        lm = lm * LM_SCALE
    undefined = np.flatnonzero(np.isnan(lm))
    start = returns.start + min_history
    missing = tuple(start + int(i) for i in undefined)
    if missing:
        logging.debug(
            "%s: LM undefined in %d quarters (zero bipower)", returns.key, len(missing)
        )
    low, high = thresholds
    magnitude = np.nan_to_num(np.abs(lm), nan=0.0)
    return JumpSeries(
        returns.key,
        Series(returns.key, start, lm),
        magnitude > low,
        magnitude > high,
        min_history,
        missing,
    )


def classify_panel(
    panel: ReturnPanel,
    min_history: int = 8,
    thresholds: Tuple[float, float] = DEFAULT_THRESHOLDS,
    scaled: bool = True,
) -> Tuple[Dict[str, JumpSeries], Tuple[str, ...]]:
    """Classify every MSA; MSAs too short for one statistic are skipped."""
    result: Dict[str, JumpSeries] = {}
    skipped = []
    for msa_id in panel.msa_ids:
        try:
            result[msa_id] = classify_jumps(panel[msa_id], min_history, thresholds, scaled)
        except SeriesTooShort as e:
            logging.warning("%s: no jump statistics: %s", msa_id, e)
            skipped.append(msa_id)
    return result, tuple(skipped)


def jump_incidence(
    jump_series: Iterable[JumpSeries], flag: str = "jump_big"
) -> Series:
    """Percentage of MSAs with a defined LM statistic that are flagged.

    Quarters where no MSA has a defined statistic are NaN inside the
    series and trimmed at either end.
    """
    lm = {}
    flagged = {}
    for js in jump_series:
        lm[js.msa_id] = js.lm_values.to_pandas()
        flagged[js.msa_id] = pd.Series(
            js.flags(flag).astype(float), index=lm[js.msa_id].index
        )
    if not lm:
        return Series("incidence", QuarterId(0), np.empty(0))
    n_defined = pd.DataFrame(lm).notna().sum(axis=1)
    n_flagged = pd.DataFrame(flagged).fillna(0.0).sum(axis=1)
    pct = (100.0 * n_flagged / n_defined.where(n_defined > 0)).sort_index()
    valid = pct.dropna()
    if len(valid) == 0:
        return Series("incidence", QuarterId(int(pct.index[0])), np.empty(0))
    pct = pct.loc[valid.index[0] : valid.index[-1]]
    pct = pct.reindex(pd.RangeIndex(int(pct.index[0]), int(pct.index[-1]) + 1))
    return Series.from_pandas("incidence", pct)
