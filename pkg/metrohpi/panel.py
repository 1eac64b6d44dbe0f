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

"""Quarters, series and MSA return panels."""

__all__ = [
    "QuarterId",
    "quarter_range",
    "CoastFlag",
    "MsaMeta",
    "Series",
    "ReturnPanel",
    "Alignment",
    "log_return",
    "log_level",
    "build_return_panel",
    "align_series",
    "align",
    "equal_weighted_log_index",
]

import logging
import re
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import (
    TYPE_CHECKING,
    Dict,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    InvalidQuarter,
    NoCommonQuarter,
    NonPositiveLevel,
    SeriesTooShort,
    UnknownState,
)

if TYPE_CHECKING:
    from .ingest import FactorPanel


BASE_YEAR = 1975
QUARTERS_PER_YEAR = 4

QUARTER_RE = re.compile(r"^\s*(\d{4})\s*[Qq]\s*([1-4])\s*$")


@dataclass(frozen=True, order=True)
class QuarterId:
    """A calendar quarter, counted from 1975Q1 (ordinal 0)."""

    ordinal: int

    def __post_init__(self):
        if not isinstance(self.ordinal, (int, np.integer)) or self.ordinal < 0:
            raise InvalidQuarter(self.ordinal)
        object.__setattr__(self, "ordinal", int(self.ordinal))

    @classmethod
    def from_year_quarter(cls, year: int, quarter: int) -> "QuarterId":
        if quarter not in (1, 2, 3, 4) or year < BASE_YEAR:
            raise InvalidQuarter(f"{year}Q{quarter}")
        return cls((year - BASE_YEAR) * QUARTERS_PER_YEAR + quarter - 1)

    @classmethod
    def parse(cls, text: Union[str, "QuarterId"]) -> "QuarterId":
        """Parse a quarter written as ``YYYYQn``."""
        if isinstance(text, QuarterId):
            return text
        m = QUARTER_RE.match(str(text))
        if not m:
            raise InvalidQuarter(text)
        return cls.from_year_quarter(int(m.group(1)), int(m.group(2)))

    @property
    def year(self) -> int:
        return BASE_YEAR + self.ordinal // QUARTERS_PER_YEAR

    @property
    def quarter(self) -> int:
        return self.ordinal % QUARTERS_PER_YEAR + 1

    def __str__(self) -> str:
        return f"{self.year}Q{self.quarter}"

    def __repr__(self) -> str:
        return f"{type(self).__name__}.parse({str(self)!r})"

    def __add__(self, other: int) -> "QuarterId":
        if isinstance(other, (int, np.integer)):
            return QuarterId(self.ordinal + int(other))
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, QuarterId):
            return self.ordinal - other.ordinal
        if isinstance(other, (int, np.integer)):
            return QuarterId(self.ordinal - int(other))
        return NotImplemented


def quarter_range(first: QuarterId, last: QuarterId) -> List[QuarterId]:
    """All quarters from first to last, inclusive."""
    return [QuarterId(o) for o in range(first.ordinal, last.ordinal + 1)]


# Census divisions as grouped for the correlation tables; California is
# broken out on its own.
CENSUS_DIVISIONS: Dict[str, Union[int, str]] = {}
for _division, _states in [
    (1, "AK HI OR WA"),
    (2, "AZ CO ID MT NM NV UT WY"),
    (3, "IA KS MN MO ND NE SD"),
    (4, "AR LA OK TX"),
    (5, "IL IN MI OH WI"),
    (6, "AL KY MS TN"),
    (7, "DC DE FL GA MD NC SC VA WV"),
    (8, "NJ NY PA"),
    (9, "CT MA ME NH RI VT"),
]:
    for _state in _states.split():
        CENSUS_DIVISIONS[_state] = _division
CENSUS_DIVISIONS["CA"] = "CA"

DIVISION_ORDER: Tuple[Union[int, str], ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9, "CA")

CALIFORNIA_COASTAL = (
    "Los Angeles",
    "Oakland",
    "Oxnard",
    "San Diego",
    "San Francisco",
    "San Jose",
    "San Luis Obispo",
    "Santa Ana",
    "Santa Barbara",
    "Santa Cruz",
)


class CoastFlag(Enum):
    COASTAL = "coastal"
    INLAND = "inland"
    NOT_CA = "not-CA"


def primary_city(name: str) -> str:
    """Reduce an FHFA MSA name to its lower-cased first city.

    "Los Angeles-Long Beach-Glendale, CA" becomes "los angeles".
    """
    return name.split(",", 1)[0].split("-", 1)[0].strip().lower()


_COASTAL_CITIES = frozenset(c.lower() for c in CALIFORNIA_COASTAL)


@dataclass(frozen=True)
class MsaMeta:
    msa_id: str
    name: str
    state: str
    census_division: Union[int, str]
    coast_flag: CoastFlag

    @classmethod
    def from_state(cls, msa_id: str, name: str, state: str) -> "MsaMeta":
        """Build metadata, deriving division and coast flag from the state.

        Raises:
          UnknownState: if the state is not in any division
        """
        state = state.strip().upper()
        try:
            division = CENSUS_DIVISIONS[state]
        except KeyError as e:
            raise UnknownState("<metadata>", 0, state) from e
        if state != "CA":
            flag = CoastFlag.NOT_CA
        elif primary_city(name) in _COASTAL_CITIES:
            flag = CoastFlag.COASTAL
        else:
            flag = CoastFlag.INLAND
        return cls(msa_id, name, state, division, flag)

    @property
    def division_tag(self) -> str:
        if self.census_division == "CA":
            return "ca"
        return f"division_{self.census_division}"


@dataclass(frozen=True, eq=False)
class Series:
    """A contiguous quarterly series.

    Ingested series never contain NaN; derived statistic series (R²,
    LM) use NaN for quarters where the statistic is undefined.
    """

    key: str
    start: QuarterId
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise DataError(f"{self.key}: series values must be one-dimensional")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.key!r}, {self.start}, n={len(self)})"

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Series)
            and self.key == other.key
            and self.start == other.start
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    @property
    def stop(self) -> QuarterId:
        """First quarter after the series."""
        return self.start + len(self)

    @property
    def end(self) -> QuarterId:
        """Last quarter of the series."""
        return self.start + (len(self) - 1)

    def covers(self, quarter: QuarterId) -> bool:
        return self.start <= quarter < self.stop

    def value_at(self, quarter: QuarterId) -> float:
        if not self.covers(quarter):
            raise KeyError(quarter)
        return float(self.values[quarter - self.start])

    def quarters(self) -> List[QuarterId]:
        return [self.start + i for i in range(len(self))]

    def window(self, first: QuarterId, last: QuarterId) -> "Series":
        """Restrict to [first, last], clipped to the series coverage."""
        lo = max(first.ordinal, self.start.ordinal)
        hi = min(last.ordinal, self.end.ordinal)
        if hi < lo:
            return Series(self.key, QuarterId(lo), np.empty(0))
        return Series(
            self.key,
            QuarterId(lo),
            self.values[lo - self.start.ordinal : hi - self.start.ordinal + 1],
        )

    def is_complete(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def to_pandas(self) -> pd.Series:
        """Convert to a pandas series indexed by quarter ordinal."""
        index = pd.RangeIndex(self.start.ordinal, self.stop.ordinal, name="quarter")
        return pd.Series(np.array(self.values), index=index, name=self.key)

    @classmethod
    def from_pandas(cls, key: str, s: pd.Series) -> "Series":
        """Build a series from a pandas series indexed by quarter ordinal."""
        s = s.sort_index()
        if len(s) == 0:
            raise SeriesTooShort(key, 0, 1)
        index = np.asarray(s.index, dtype=int)
        expected = np.arange(index[0], index[0] + len(index))
        if not np.array_equal(index, expected):
            missing = sorted(set(expected) - set(index))
            raise DataError(f"{key}: index is not contiguous near {QuarterId(missing[0])}")
        return cls(key, QuarterId(int(index[0])), s.to_numpy(dtype=float))


@dataclass(frozen=True)
class ReturnPanel:
    """Quarterly MSA log returns (percent) with region metadata."""

    series: Mapping[str, Series]
    metadata: Mapping[str, MsaMeta]

    def __post_init__(self):
        for msa_id, s in self.series.items():
            if msa_id not in self.metadata:
                raise DataError(f"no metadata for {msa_id}")
            if s.key != msa_id:
                raise DataError(f"series {s.key} stored under key {msa_id}")
        object.__setattr__(
            self,
            "series",
            MappingProxyType({k: self.series[k] for k in sorted(self.series)}),
        )
        object.__setattr__(
            self,
            "metadata",
            MappingProxyType({k: self.metadata[k] for k in sorted(self.metadata)}),
        )

    def __len__(self) -> int:
        return len(self.series)

    def __contains__(self, msa_id: str) -> bool:
        return msa_id in self.series

    def __getitem__(self, msa_id: str) -> Series:
        return self.series[msa_id]

    @property
    def msa_ids(self) -> List[str]:
        return list(self.series)

    @property
    def grid(self) -> Tuple[QuarterId, QuarterId]:
        if not self.series:
            raise DataError("empty panel has no grid")
        return (
            min(s.start for s in self.series.values()),
            max(s.end for s in self.series.values()),
        )

    def subset(self, msa_ids: Iterable[str]) -> "ReturnPanel":
        ids = list(msa_ids)
        return ReturnPanel(
            {k: self.series[k] for k in ids}, {k: self.metadata[k] for k in ids}
        )

    def select(self, predicate) -> "ReturnPanel":
        """Sub-panel of the MSAs whose metadata satisfies predicate."""
        return self.subset(k for k in self.series if predicate(self.metadata[k]))

    def resolve(self, key: str) -> Optional[str]:
        """Find an MSA by id, or else by (primary city) name."""
        if key in self.series:
            return key
        wanted = key.strip().lower()
        for msa_id, meta in self.metadata.items():
            if msa_id in self.series and (
                meta.name.lower() == wanted or primary_city(meta.name) == wanted
            ):
                return msa_id
        return None

    def to_frame(self) -> pd.DataFrame:
        """Quarters (rows, ordinals over the grid) by MSAs (columns, sorted)."""
        first, last = self.grid
        index = pd.RangeIndex(first.ordinal, last.ordinal + 1, name="quarter")
        frame = pd.DataFrame({k: s.to_pandas() for k, s in self.series.items()})
        return frame.reindex(index=index, columns=self.msa_ids)


def log_return(index_series: Series) -> Series:
    """Percent log returns of a price level series.

    Args:
      index_series: price levels
    Returns:
      series one quarter shorter, starting one quarter later, with
      values 100 * ln(P_t / P_{t-1})
    Raises:
      SeriesTooShort: fewer than two levels
      NonPositiveLevel: a level is zero or negative
    """
    if len(index_series) < 2:
        raise SeriesTooShort(index_series.key, len(index_series), 2)
    levels = index_series.values
    bad = np.flatnonzero(~(levels > 0))
    if len(bad):
        i = int(bad[0])
        raise NonPositiveLevel(index_series.key, index_series.start + i, float(levels[i]))
    return Series(
        index_series.key, index_series.start + 1, 100.0 * np.diff(np.log(levels))
    )


def log_level(returns: Series) -> Series:
    """Cumulative log price level (natural log units) implied by returns.

    The level is defined up to a constant; the value at the first quarter
    equals the first return.
    """
    return Series(returns.key, returns.start, np.cumsum(returns.values) / 100.0)


def build_return_panel(
    levels: Mapping[str, Series], metadata: Mapping[str, MsaMeta]
) -> ReturnPanel:
    """Convert price level series into a return panel."""
    series = {}
    for msa_id in sorted(levels):
        series[msa_id] = log_return(levels[msa_id])
    logging.debug("Built return panel with %d MSAs", len(series))
    return ReturnPanel(series, {k: metadata[k] for k in series})


class Alignment(NamedTuple):
    """Joint observations of one MSA return series and the factors."""

    msa_id: str
    quarters: Tuple[QuarterId, ...]
    y: np.ndarray
    X: np.ndarray
    factor_keys: Tuple[str, ...]

    @property
    def skipped(self) -> bool:
        return len(self.quarters) == 0


def align_series(
    returns: Series,
    factors: "FactorPanel",
    window: Tuple[QuarterId, QuarterId],
) -> Alignment:
    """Collect the quarters in window where the series and every factor exist."""
    first, last = window
    if last < first:
        raise DataError(f"empty window {first}..{last}")
    keys = tuple(factors.factors)
    lo = max([first, returns.start] + [f.start for f in factors.factors.values()])
    hi = min([last, returns.end] + [f.end for f in factors.factors.values()])
    quarters: List[QuarterId] = []
    for o in range(lo.ordinal, hi.ordinal + 1):
        q = QuarterId(o)
        row = [returns.value_at(q)] + [factors.factors[k].value_at(q) for k in keys]
        if np.all(np.isfinite(row)):
            quarters.append(q)
    if not quarters:
        logging.warning(
            "%s: no quarters in common with the factors in %s..%s; skipped",
            returns.key,
            first,
            last,
        )
        return Alignment(returns.key, (), np.empty(0), np.empty((0, len(keys))), keys)
    y = np.array([returns.value_at(q) for q in quarters])
    X = np.array([[factors.factors[k].value_at(q) for k in keys] for q in quarters])
    return Alignment(returns.key, tuple(quarters), y, X, keys)


def align(
    panel: ReturnPanel,
    factors: "FactorPanel",
    window: Tuple[QuarterId, QuarterId],
) -> Dict[str, Alignment]:
    """Align every MSA in the panel with the factors."""
    return {
        msa_id: align_series(s, factors, window) for msa_id, s in panel.series.items()
    }


def equal_weighted_log_index(
    panel: ReturnPanel, subset: Sequence[str], mode: str = "log"
) -> Series:
    """Equal-weighted index of the subset's log price levels.

    Each MSA's cumulative log level is rebased to zero at the first quarter
    all members share, and the levels are averaged per quarter.

    Args:
      panel: return panel
      subset: MSA ids to average
      mode: "log" averages log levels; "level" averages rebased price
        levels and takes the log of the average
    Raises:
      NoCommonQuarter: when the members share no quarter
    """
    if not subset:
        raise DataError("equal-weighted index of an empty subset")
    if mode not in ("log", "level"):
        raise ValueError(mode)
    ids = sorted(set(subset))
    levels = [log_level(panel[msa_id]) for msa_id in ids]
    first = max(s.start for s in levels)
    last = min(s.end for s in levels)
    if last < first:
        limiting = max(levels, key=lambda s: (s.start, s.key))
        raise NoCommonQuarter(limiting.key)
    n = last - first + 1
    stacked = np.empty((len(levels), n))
    for i, s in enumerate(levels):
        w = s.window(first, last).values
        stacked[i] = w - w[0]
    if mode == "log":
        values = stacked.mean(axis=0)
    else:
        values = np.log(np.exp(stacked).mean(axis=0))
    return Series("equal_weighted", first, values)
