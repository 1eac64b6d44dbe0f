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

"""Exceptions raised by metrohpi."""

__all__ = [
    "MetroHpiError",
    "DataError",
    "NumericalError",
    "ConfigError",
    "StageError",
    "InvalidQuarter",
    "NonPositiveLevel",
    "SeriesTooShort",
    "SchemaMismatch",
    "UnreadableTable",
    "DuplicateRow",
    "OutOfOrderRow",
    "GapInSeries",
    "UnknownState",
    "InvalidValue",
    "MissingFactor",
    "NoCommonQuarter",
    "InsufficientOverlap",
    "RankDeficient",
    "InsufficientObservations",
    "UndefinedStatistic",
    "NonStationaryResiduals",
    "CochraneOrcuttDiverged",
]

from typing import Optional, Sequence


class MetroHpiError(Exception):
    """Base class for metrohpi errors."""


class DataError(MetroHpiError):
    """Input data is malformed or inconsistent."""


class NumericalError(MetroHpiError):
    """A numerical procedure could not produce a result."""


class ConfigError(MetroHpiError):
    """The run configuration is invalid."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class StageError(MetroHpiError):
    """A pipeline stage is missing a prerequisite."""

    def __init__(self, stage: str, path: str):
        super().__init__(f"stage {stage!r} has not produced {path}")
        self.stage = stage
        self.path = path


class InvalidQuarter(DataError):
    """A quarter could not be parsed or lies before 1975Q1."""

    def __init__(self, text):
        super().__init__(f"invalid quarter: {text!r}")
        self.text = text


class NonPositiveLevel(DataError):
    """A price level that is about to be logged is not positive."""

    def __init__(self, key: str, quarter, value: float):
        super().__init__(f"{key}: non-positive value {value!r} at {quarter}")
        self.key = key
        self.quarter = quarter
        self.value = value


class SeriesTooShort(DataError):
    """A series has fewer observations than an operation needs."""

    def __init__(self, key: str, length: int, required: int):
        super().__init__(f"{key}: {length} observations, at least {required} required")
        self.key = key
        self.length = length
        self.required = required


class SchemaMismatch(DataError):
    """A CSV header does not match the expected schema."""

    def __init__(self, path: str, expected: Sequence[str], actual: Sequence[str]):
        super().__init__(
            f"{path}: expected columns {','.join(expected)}, got {','.join(actual)}"
        )
        self.path = path
        self.expected = tuple(expected)
        self.actual = tuple(actual)


class UnreadableTable(DataError):
    """A CSV file could not be decoded or split into rows."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class DuplicateRow(DataError):
    """The same series and quarter appear twice."""

    def __init__(self, path: str, row: int, key: str, quarter):
        super().__init__(f"{path}:{row}: duplicate row for {key} {quarter}")
        self.path = path
        self.row = row
        self.key = key
        self.quarter = quarter


class OutOfOrderRow(DataError):
    """A row precedes the quarters already read for its series."""

    def __init__(self, path: str, row: int, key: str, quarter):
        super().__init__(f"{path}:{row}: {key} {quarter} is out of order")
        self.path = path
        self.row = row
        self.key = key
        self.quarter = quarter


class GapInSeries(DataError):
    """A series skips a quarter."""

    def __init__(self, key: str, quarter):
        super().__init__(f"{key}: missing quarter {quarter}")
        self.key = key
        self.quarter = quarter


class UnknownState(DataError):
    """A state code is not part of any census division."""

    def __init__(self, path: str, row: int, state: str):
        super().__init__(f"{path}:{row}: unknown state code {state!r}")
        self.path = path
        self.row = row
        self.state = state


class InvalidValue(DataError):
    """A field could not be parsed."""

    def __init__(self, path: str, row: int, column: str, value: str):
        super().__init__(f"{path}:{row}: invalid {column} {value!r}")
        self.path = path
        self.row = row
        self.column = column
        self.value = value


class MissingFactor(DataError):
    """A required factor series is absent."""

    def __init__(self, key: str):
        super().__init__(f"factor {key} is missing")
        self.key = key


class NoCommonQuarter(DataError):
    """A set of series shares no quarter."""

    def __init__(self, msa_id: str):
        super().__init__(f"no quarter common to all series; limited by {msa_id}")
        self.msa_id = msa_id


class InsufficientOverlap(DataError):
    """Two series overlap for too few quarters."""

    def __init__(self, available: int, required: int):
        super().__init__(
            f"{available} overlapping observations, at least {required} required"
        )
        self.available = available
        self.required = required


class RankDeficient(NumericalError):
    """The design matrix does not have full column rank."""

    def __init__(self, columns: Sequence[str], condition: float):
        super().__init__(
            f"design matrix is rank deficient (condition {condition:.3g}); "
            f"dependent columns: {', '.join(columns)}"
        )
        self.columns = tuple(columns)
        self.condition = condition


class InsufficientObservations(NumericalError):
    """Fewer observations than parameters."""

    def __init__(self, n_obs: int, n_params: int):
        super().__init__(f"{n_obs} observations for {n_params} parameters")
        self.n_obs = n_obs
        self.n_params = n_params


class UndefinedStatistic(NumericalError):
    """A statistic is undefined for its input."""


class NonStationaryResiduals(NumericalError):
    """Cochrane-Orcutt produced an autocorrelation outside (-1, 1)."""

    def __init__(self, rho: float):
        super().__init__(f"residual autocorrelation {rho:.6f} is not stationary")
        self.rho = rho


class CochraneOrcuttDiverged(NumericalError):
    """Cochrane-Orcutt did not converge."""

    def __init__(self, rho: float, iterations: int):
        super().__init__(
            f"no convergence after {iterations} iterations (last rho {rho:.6f})"
        )
        self.rho = rho
        self.iterations = iterations
