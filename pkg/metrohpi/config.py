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

"""Run configuration, read from a flat TOML file."""

__all__ = [
    "DEFAULT_REGIONS",
    "RunConfig",
    "load_config",
    "parse_config",
    "dump_config",
    "config_echo",
]

import dataclasses
import os
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Dict, Mapping, Optional, Tuple

import tomlkit
from tomlkit.exceptions import TOMLKitError

from .contagion import Interaction, SerialPolicy
from .correlations import Centering
from .errors import ConfigError, InvalidQuarter
from .ingest import DEFAULT_FACTOR_TRANSFORMS, FactorTransform
from .panel import QuarterId

DEFAULT_REGIONS: Mapping[str, Tuple[str, ...]] = MappingProxyType(
    {
        "Los Angeles": (
            "Bakersfield",
            "Fresno",
            "Oxnard",
            "Riverside",
            "San Diego",
            "Santa Ana",
            "Santa Barbara",
        ),
        "San Francisco": (
            "Merced",
            "Modesto",
            "Napa",
            "Oakland",
            "Sacramento",
            "Salinas",
            "San Jose",
            "Santa Cruz",
            "Santa Rosa",
            "Stockton",
            "Vallejo",
        ),
        "Santa Barbara": ("Oxnard", "San Luis Obispo"),
    }
)

PATH_KEYS = ("hpi_csv", "factor_csv", "output_dir")


def _q(text: str) -> QuarterId:
    return QuarterId.parse(text)


@dataclass(frozen=True)
class RunConfig:
    hpi_csv: Optional[str] = None
    factor_csv: Optional[str] = None
    output_dir: str = "out"
    report_start: QuarterId = _q("1983Q4")
    report_end: QuarterId = _q("2010Q1")
    window_len: int = 20
    min_history: int = 8
    jump_thresholds: Tuple[float, float] = (1.65, 2.0)
    jump_gate: float = 2.0
    lm_scaled: bool = True
    corr_t_thresholds: Tuple[float, ...] = (2.0, 3.0)
    division_t_threshold: float = 5.0
    min_return_overlap: int = 8
    min_jump_obs: int = 3
    jump_corr_centering: Centering = Centering.UNION
    cohort_starts: Tuple[QuarterId, ...] = (_q("1983Q4"), _q("1989Q2"), _q("1992Q1"))
    regions: Mapping[str, Tuple[str, ...]] = field(default_factory=lambda: DEFAULT_REGIONS)
    n_lags: int = 3
    interaction_lags: Optional[int] = None
    interaction: Interaction = Interaction.PRIMARY_CITY_RESIDUAL
    serial_policy: SerialPolicy = SerialPolicy.AUTO_COCHRANE_ORCUTT
    prewhiten: bool = True
    ew_index_mode: str = "log"
    factor_keys: Optional[Tuple[str, ...]] = None
    fig1_base: QuarterId = _q("1980Q1")
    seed: Optional[int] = None
    synth_n_msas: int = 24
    synth_start: QuarterId = _q("1975Q1")
    synth_end: QuarterId = _q("2010Q1")
    synth_population_r2: float = 0.5
    synth_return_sigma: float = 2.45
    synth_jumps_per_msa: int = 2
    synth_jump_size: float = 10.0
    synth_lead_coeffs: Tuple[float, float] = (0.6, 0.3)

    def __post_init__(self):
        self.validate()

    @property
    def report_span(self) -> Tuple[QuarterId, QuarterId]:
        return (self.report_start, self.report_end)

    def factor_transforms(self) -> Dict[str, FactorTransform]:
        if self.factor_keys is None:
            return dict(DEFAULT_FACTOR_TRANSFORMS)
        return {k: DEFAULT_FACTOR_TRANSFORMS[k] for k in self.factor_keys}

    def validate(self) -> None:
        positive = {
            "jump_gate": self.jump_gate,
            "division_t_threshold": self.division_t_threshold,
            "synth_jump_size": self.synth_jump_size,
            "synth_return_sigma": self.synth_return_sigma,
        }
        for i, v in enumerate(self.jump_thresholds):
            positive[f"jump_thresholds[{i}]"] = v
        for i, v in enumerate(self.corr_t_thresholds):
            positive[f"corr_t_thresholds[{i}]"] = v
        for key, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{key} must be positive, got {value!r}", key)
        if len(self.jump_thresholds) != 2 or not (
            self.jump_thresholds[0] < self.jump_thresholds[1]
        ):
            raise ConfigError(
                "jump_thresholds must be two increasing values", "jump_thresholds"
            )
        if self.window_len <= 14:
            raise ConfigError(
                f"window_len must exceed 14, got {self.window_len}", "window_len"
            )
        if self.min_history < 2:
            raise ConfigError("min_history must be at least 2", "min_history")
        if self.min_return_overlap < 3:
            raise ConfigError("min_return_overlap must be at least 3", "min_return_overlap")
        if self.min_jump_obs < 3:
            raise ConfigError("min_jump_obs must be at least 3", "min_jump_obs")
        if self.n_lags < 0:
            raise ConfigError("n_lags must be >= 0", "n_lags")
        if self.interaction_lags is not None and self.interaction_lags < 0:
            raise ConfigError("interaction_lags must be >= 0", "interaction_lags")
        if self.report_end < self.report_start:
            raise ConfigError("report_end precedes report_start", "report_end")
        if self.ew_index_mode not in ("log", "level"):
            raise ConfigError(
                f"ew_index_mode must be log or level, got {self.ew_index_mode!r}",
                "ew_index_mode",
            )
        if self.factor_keys is not None:
            unknown = [k for k in self.factor_keys if k not in DEFAULT_FACTOR_TRANSFORMS]
            if unknown:
                raise ConfigError(f"unknown factors: {', '.join(unknown)}", "factor_keys")
            if not self.factor_keys:
                raise ConfigError("factor_keys is empty", "factor_keys")
        if not 0 < self.synth_population_r2 < 1:
            raise ConfigError(
                "synth_population_r2 must lie strictly between 0 and 1",
                "synth_population_r2",
            )
        if self.synth_n_msas < 1:
            raise ConfigError("synth_n_msas must be positive", "synth_n_msas")
        if self.synth_end - self.synth_start + 1 < self.window_len + 2:
            raise ConfigError("synthetic span is too short for the window", "synth_end")

    def with_overrides(
        self, output_dir: Optional[str] = None, seed: Optional[int] = None
    ) -> "RunConfig":
        changes: Dict[str, Any] = {}
        if output_dir is not None:
            changes["output_dir"] = output_dir
        if seed is not None:
            changes["seed"] = seed
        return dataclasses.replace(self, **changes) if changes else self


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _split_list(key: str, value) -> list:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    if isinstance(value, list):
        return value
    raise ConfigError(f"{key} must be a list or a comma-separated string", key)


def _convert(key: str, value):
    default = _FIELDS[key].default
    try:
        if key in ("cohort_starts",):
            return tuple(QuarterId.parse(str(v)) for v in _split_list(key, value))
        if key in ("jump_thresholds", "corr_t_thresholds", "synth_lead_coeffs"):
            return tuple(float(v) for v in _split_list(key, value))
        if key == "factor_keys":
            return tuple(str(v).strip() for v in _split_list(key, value))
        if isinstance(default, QuarterId):
            return QuarterId.parse(str(value))
        if isinstance(default, Enum):
            return type(default)(str(value))
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{key} must be true or false", key)
            return value
        if isinstance(default, int) or key in ("seed", "interaction_lags"):
            if isinstance(value, bool) or int(value) != value:
                raise ConfigError(f"{key} must be an integer", key)
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (ValueError, TypeError, InvalidQuarter) as e:
        raise ConfigError(f"invalid value for {key}: {value!r} ({e})", key)


def _convert_regions(value) -> Dict[str, Tuple[str, ...]]:
    if not isinstance(value, dict):
        raise ConfigError("regions must be a table", "regions")
    regions = {}
    for primary, satellites in value.items():
        regions[str(primary)] = tuple(
            str(s).strip() for s in _split_list(f"regions.{primary}", satellites)
        )
    return regions


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Build a RunConfig from TOML text.

    Relative paths are taken relative to base_dir.

    Raises:
      ConfigError: unparseable text, an unknown key or an invalid value
    """
    try:
        document = tomlkit.parse(text).unwrap()
    except TOMLKitError as e:
        raise ConfigError(f"cannot parse configuration: {e}")
    values: Dict[str, Any] = {}
    for key, value in document.items():
        if key == "regions":
            values[key] = MappingProxyType(_convert_regions(value))
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown configuration key {key!r}", key)
        values[key] = _convert(key, value)
    for key in PATH_KEYS:
        if key in values and not os.path.isabs(values[key]):
            values[key] = os.path.normpath(os.path.join(base_dir, values[key]))
    if "output_dir" not in values:
        values["output_dir"] = os.path.normpath(os.path.join(base_dir, "out"))
    return RunConfig(**values)


def load_config(path: str) -> RunConfig:
    """Read a configuration file.

    Raises:
      ConfigError: the file is missing or invalid
    """
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except FileNotFoundError:
        raise ConfigError(f"configuration file {path} does not exist")
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def _plain(value):
    if isinstance(value, QuarterId):
        return str(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, Mapping):
        return {k: _plain(v) for k, v in value.items()}
    return value


def config_echo(config: RunConfig) -> Dict[str, Any]:
    """Configuration as JSON-compatible values; unset optional values are omitted."""
    echo = {}
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if value is None:
            continue
        echo[f.name] = _plain(value)
    return echo


def dump_config(config: RunConfig, base_dir: Optional[str] = None) -> str:
    """Serialize a configuration to TOML.

    Paths under base_dir are written relative to it.
    """
    document = tomlkit.document()
    echo = config_echo(config)
    regions = echo.pop("regions")
    for key, value in echo.items():
        if base_dir is not None and key in PATH_KEYS:
            value = os.path.relpath(value, base_dir)
        document.add(key, value)
    table = tomlkit.table()
    for primary, satellites in regions.items():
        table.add(primary, satellites)
    document.add("regions", table)
    return tomlkit.dumps(document)
