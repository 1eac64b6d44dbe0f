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

"""Reading house price index and national factor CSV files."""

__all__ = [
    "FactorTransform",
    "FactorPanel",
    "RawTableSchema",
    "HPI_SCHEMA",
    "FACTOR_SCHEMA",
    "DEFAULT_FACTOR_TRANSFORMS",
    "HpiTable",
    "parse_hpi_csv",
    "parse_factor_csv",
    "transform_factors",
    "write_hpi_csv",
    "write_factor_csv",
    "returns_to_frames",
    "returns_from_frames",
    "factors_to_frame",
    "factors_from_frame",
]

import logging
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    DuplicateRow,
    GapInSeries,
    InvalidQuarter,
    InvalidValue,
    MissingFactor,
    NonPositiveLevel,
    OutOfOrderRow,
    SchemaMismatch,
    UnknownState,
    UnreadableTable,
)
from .panel import MsaMeta, QuarterId, Series


class FactorTransform(Enum):
    LOG_PCT_CHANGE = "log_pct_change"
    LOG_LEVEL = "log_level"


DEFAULT_FACTOR_TRANSFORMS: Mapping[str, FactorTransform] = MappingProxyType(
    {
        "CNP16OV": FactorTransform.LOG_PCT_CHANGE,
        "CPILFESL": FactorTransform.LOG_PCT_CHANGE,
        "FEDFUNDS": FactorTransform.LOG_LEVEL,
        "GS10": FactorTransform.LOG_LEVEL,
        "INDPRO": FactorTransform.LOG_PCT_CHANGE,
        "PAYEMS": FactorTransform.LOG_PCT_CHANGE,
        "PERMIT1": FactorTransform.LOG_LEVEL,
        "PPIITM": FactorTransform.LOG_PCT_CHANGE,
        "UMCSENT": FactorTransform.LOG_LEVEL,
        "UNRATE": FactorTransform.LOG_LEVEL,
        "SP500": FactorTransform.LOG_PCT_CHANGE,
        "INCOME": FactorTransform.LOG_PCT_CHANGE,
    }
)


@dataclass(frozen=True)
class FactorPanel:
    """Transformed national factor series."""

    factors: Mapping[str, Series]
    transforms: Mapping[str, FactorTransform]

    def __post_init__(self):
        if set(self.factors) != set(self.transforms):
            raise DataError("every factor needs exactly one transform tag")
        for key, s in self.factors.items():
            if not s.is_complete():
                raise DataError(f"factor {key} contains missing values")
        object.__setattr__(self, "factors", MappingProxyType(dict(self.factors)))
        object.__setattr__(self, "transforms", MappingProxyType(dict(self.transforms)))

    def __len__(self) -> int:
        return len(self.factors)

    @property
    def keys(self) -> Tuple[str, ...]:
        return tuple(self.factors)


class RawTableSchema(NamedTuple):
    name: str
    columns: Tuple[str, ...]

    def check(self, path: str, header: Sequence[str]) -> None:
        actual = tuple(str(c).strip().lower() for c in header)
        if actual != self.columns:
            raise SchemaMismatch(path, self.columns, tuple(header))


HPI_SCHEMA = RawTableSchema(
    "hpi", ("msa_id", "msa_name", "state", "year", "quarter", "index")
)
FACTOR_SCHEMA = RawTableSchema("factor", ("quarter_id", "series_id", "value"))


class HpiTable(NamedTuple):
    levels: Dict[str, Series]
    metadata: Dict[str, MsaMeta]


def _read_table(path: str, schema: RawTableSchema) -> pd.DataFrame:
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
            skipinitialspace=True,
        )
    except UnicodeDecodeError as e:
        raise UnreadableTable(path, f"not valid UTF-8 at byte {e.start}")
    except pd.errors.EmptyDataError:
        raise UnreadableTable(path, "empty file")
    except pd.errors.ParserError as e:
        raise UnreadableTable(path, str(e))
    schema.check(path, list(frame.columns))
    frame.columns = list(schema.columns)
    if len(frame) == 0:
        raise DataError(f"{path}: no data rows")
    return frame


def _parse_float(path: str, row: int, column: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InvalidValue(path, row, column, text)
    if not np.isfinite(value):
        raise InvalidValue(path, row, column, text)
    return value


class _SeriesBuilder:
    """Accumulates one series from rows that must arrive in quarter order."""

    def __init__(self, key: str, start: QuarterId):
        self.key = key
        self.start = start
        self.values: List[float] = []

    @property
    def last(self) -> QuarterId:
        return self.start + (len(self.values) - 1)

    def add(self, path: str, row: int, quarter: QuarterId, value: float) -> None:
        if self.values:
            if quarter <= self.last:
                if quarter >= self.start:
                    raise DuplicateRow(path, row, self.key, quarter)
                raise OutOfOrderRow(path, row, self.key, quarter)
            if quarter != self.last + 1:
                raise GapInSeries(self.key, self.last + 1)
        self.values.append(value)

    def build(self) -> Series:
        return Series(self.key, self.start, np.array(self.values))


def parse_hpi_csv(path: str) -> HpiTable:
    """Parse an MSA house price index file.

    Args:
      path: CSV with header msa_id,msa_name,state,year,quarter,index
    Returns:
      level series and metadata per MSA
    Raises:
      SchemaMismatch: header differs from the schema
      DuplicateRow: repeated (msa_id, quarter)
      OutOfOrderRow: quarter earlier than the MSA's first quarter
      GapInSeries: a quarter is skipped
      UnknownState: state is not in the census division map
    """
    frame = _read_table(path, HPI_SCHEMA)
    builders: Dict[str, _SeriesBuilder] = {}
    metadata: Dict[str, MsaMeta] = {}
    for i, rec in enumerate(frame.itertuples(index=False)):
        row = i + 2
        msa_id = rec.msa_id.strip()
        if not msa_id:
            raise InvalidValue(path, row, "msa_id", rec.msa_id)
        try:
            quarter = QuarterId.from_year_quarter(int(rec.year), int(rec.quarter))
        except (ValueError, InvalidQuarter):
            raise InvalidValue(path, row, "year/quarter", f"{rec.year}/{rec.quarter}")
        level = _parse_float(path, row, "index", rec.index)
        if level <= 0:
            raise NonPositiveLevel(msa_id, quarter, level)
        if msa_id not in metadata:
            try:
                metadata[msa_id] = MsaMeta.from_state(msa_id, rec.msa_name.strip(), rec.state)
            except UnknownState:
                raise UnknownState(path, row, rec.state)
            builders[msa_id] = _SeriesBuilder(msa_id, quarter)
        elif (
            metadata[msa_id].name != rec.msa_name.strip()
            or metadata[msa_id].state != rec.state.strip().upper()
        ):
            raise DataError(f"{path}:{row}: inconsistent name or state for {msa_id}")
        builders[msa_id].add(path, row, quarter, level)
    levels = {k: builders[k].build() for k in sorted(builders)}
    logging.info("Read %d MSA index series from %s", len(levels), path)
    return HpiTable(levels, {k: metadata[k] for k in sorted(metadata)})


def parse_factor_csv(path: str) -> Dict[str, Series]:
    """Parse a national factor file of raw levels.

    Args:
      path: CSV with header quarter_id,series_id,value
    Returns:
      dictionary mapping series id to level series
    """
    frame = _read_table(path, FACTOR_SCHEMA)
    builders: Dict[str, _SeriesBuilder] = {}
    for i, rec in enumerate(frame.itertuples(index=False)):
        row = i + 2
        key = rec.series_id.strip()
        try:
            quarter = QuarterId.parse(rec.quarter_id)
        except InvalidQuarter:
            raise InvalidValue(path, row, "quarter_id", rec.quarter_id)
        value = _parse_float(path, row, "value", rec.value)
        if key not in builders:
            builders[key] = _SeriesBuilder(key, quarter)
        builders[key].add(path, row, quarter, value)
    raw = {k: builders[k].build() for k in sorted(builders)}
    for key, s in raw.items():
        logging.debug("Factor %s covers %s..%s", key, s.start, s.end)
    return raw


def transform_factors(
    raw: Mapping[str, Series],
    transforms: Optional[Mapping[str, FactorTransform]] = None,
) -> FactorPanel:
    """Apply log-level or log-percent-change transforms to raw factors.

    Args:
      raw: raw level series by key
      transforms: factor keys (in order) and their transforms; defaults to
        the twelve national factors
    Raises:
      MissingFactor: a requested factor is absent from raw
      NonPositiveLevel: a logged series has a non-positive value
    """
    if transforms is None:
        transforms = DEFAULT_FACTOR_TRANSFORMS
    factors: Dict[str, Series] = {}
    for key, transform in transforms.items():
        try:
            levels = raw[key]
        except KeyError:
            raise MissingFactor(key)
        bad = np.flatnonzero(~(levels.values > 0))
        if len(bad):
            i = int(bad[0])
            raise NonPositiveLevel(key, levels.start + i, float(levels.values[i]))
        logged = np.log(levels.values)
        if transform is FactorTransform.LOG_PCT_CHANGE:
            if len(levels) < 2:
                raise DataError(f"factor {key} needs two quarters to difference")
            factors[key] = Series(key, levels.start + 1, 100.0 * np.diff(logged))
        else:
            factors[key] = Series(key, levels.start, logged)
    unused = sorted(set(raw) - set(transforms))
    if unused:
        logging.debug("Ignoring factors not in the model: %s", ", ".join(unused))
    return FactorPanel(factors, dict(transforms))


def _format_value(value: float) -> str:
    return repr(float(value))


def write_hpi_csv(
    path: str, levels: Mapping[str, Series], metadata: Mapping[str, MsaMeta]
) -> None:
    """Write index levels in the HPI schema (inverse of parse_hpi_csv)."""
    rows = []
    for msa_id in sorted(levels):
        meta = metadata[msa_id]
        s = levels[msa_id]
        for q, v in zip(s.quarters(), s.values):
            rows.append(
                (msa_id, meta.name, meta.state, str(q.year), str(q.quarter), _format_value(v))
            )
    frame = pd.DataFrame(rows, columns=list(HPI_SCHEMA.columns))
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def write_factor_csv(path: str, raw: Mapping[str, Series]) -> None:
    """Write raw factor levels in the factor schema."""
    rows = []
    for key in sorted(raw):
        s = raw[key]
        for q, v in zip(s.quarters(), s.values):
            rows.append((str(q), key, _format_value(v)))
    frame = pd.DataFrame(rows, columns=list(FACTOR_SCHEMA.columns))
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def _series_from_long(frame: pd.DataFrame, key_column: str, value_column: str):
    result: Dict[str, Series] = {}
    for key, group in frame.groupby(key_column, sort=True):
        ordinals = [QuarterId.parse(q).ordinal for q in group["quarter"]]
        values = pd.Series(group[value_column].to_numpy(dtype=float), index=ordinals)
        result[str(key)] = Series.from_pandas(str(key), values)
    return result


def returns_to_frames(
    series: Mapping[str, Series], metadata: Mapping[str, MsaMeta]
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Long return table (msa_id, quarter, ret) and the metadata table."""
    rows = [
        (msa_id, str(q), v)
        for msa_id in sorted(series)
        for q, v in zip(series[msa_id].quarters(), series[msa_id].values)
    ]
    returns = pd.DataFrame(rows, columns=["msa_id", "quarter", "ret"])
    meta = pd.DataFrame(
        [
            (m.msa_id, m.name, m.state, str(m.census_division), m.coast_flag.value)
            for m in (metadata[k] for k in sorted(metadata))
        ],
        columns=["msa_id", "name", "state", "census_division", "coast_flag"],
    )
    return returns, meta


def returns_from_frames(
    returns: pd.DataFrame, meta: pd.DataFrame
) -> Tuple[Dict[str, Series], Dict[str, MsaMeta]]:
    """Inverse of returns_to_frames; division and coast flag are rederived."""
    returns = returns.astype({"msa_id": str})
    series = _series_from_long(returns, "msa_id", "ret")
    metadata = {
        str(rec.msa_id): MsaMeta.from_state(str(rec.msa_id), rec.name, rec.state)
        for rec in meta.astype({"msa_id": str}).itertuples(index=False)
    }
    return series, metadata


def factors_to_frame(factors: FactorPanel) -> pd.DataFrame:
    """Long table of transformed factors (quarter, series_id, value)."""
    rows = [
        (str(q), key, v)
        for key in factors.keys
        for q, v in zip(factors.factors[key].quarters(), factors.factors[key].values)
    ]
    return pd.DataFrame(rows, columns=["quarter", "series_id", "value"])


def factors_from_frame(
    frame: pd.DataFrame, transforms: Mapping[str, FactorTransform]
) -> FactorPanel:
    """Rebuild a factor panel from its long table.

    Raises:
      MissingFactor: a factor named in transforms is not in the table
    """
    series = _series_from_long(frame, "series_id", "value")
    factors = {}
    for key in transforms:
        try:
            factors[key] = series[key]
        except KeyError:
            raise MissingFactor(key)
    return FactorPanel(factors, dict(transforms))
