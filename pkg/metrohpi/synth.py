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

"""Synthetic house price and factor panels with known parameters.

The generated returns follow a factor model whose population R² is set
in the configuration, with lead-lag satellites of the configured
regions and a few large shocks injected at recorded quarters. The
ground truth is written next to the data so results can be checked
against it.
"""

__all__ = [
    "SynthData",
    "generate",
    "write_synth",
    "HPI_FILENAME",
    "FACTOR_FILENAME",
    "TRUTH_FILENAME",
    "CONFIG_FILENAME",
]

import dataclasses
import json
import logging
import math
import os
from typing import Any, Dict, List, NamedTuple, Tuple

import numpy as np
import pandas as pd

from .config import RunConfig, dump_config
from .errors import ConfigError
from .ingest import FactorTransform, write_factor_csv, write_hpi_csv
from .outputs import write_output_file
from .panel import MsaMeta, QuarterId, Series

HPI_FILENAME = "hpi.csv"
FACTOR_FILENAME = "factors.csv"
TRUTH_FILENAME = "truth.json"
CONFIG_FILENAME = "metrohpi.toml"

UMCSENT_START = QuarterId.parse("1977Q4")
MEAN_RETURN = 1.0
LEVEL_FACTOR_PERSISTENCE = 0.8

# Cities outside California, spread over the census divisions.
OTHER_CITIES = (
    ("Seattle", "WA"),
    ("Phoenix", "AZ"),
    ("Minneapolis", "MN"),
    ("Dallas", "TX"),
    ("Chicago", "IL"),
    ("Nashville", "TN"),
    ("Atlanta", "GA"),
    ("New York", "NY"),
    ("Boston", "MA"),
    ("Portland", "OR"),
    ("Denver", "CO"),
    ("Kansas City", "MO"),
    ("Houston", "TX"),
    ("Detroit", "MI"),
    ("Louisville", "KY"),
    ("Miami", "FL"),
    ("Philadelphia", "PA"),
    ("Hartford", "CT"),
    ("Honolulu", "HI"),
    ("Las Vegas", "NV"),
    ("Omaha", "NE"),
    ("Oklahoma City", "OK"),
    ("Columbus", "OH"),
    ("Memphis", "TN"),
    ("Charlotte", "NC"),
    ("Pittsburgh", "PA"),
    ("Providence", "RI"),
    ("Salt Lake City", "UT"),
)

# Filler states when the catalog runs out of named cities.
FILLER_STATES = ("WA", "AZ", "MN", "TX", "IL", "TN", "GA", "NY", "MA")


class SynthData(NamedTuple):
    levels: Dict[str, Series]
    metadata: Dict[str, MsaMeta]
    raw_factors: Dict[str, Series]
    truth: Dict[str, Any]


def _catalog(config: RunConfig) -> List[Tuple[str, str]]:
    """(name, state) of every MSA to generate, region primaries first."""
    ca: List[str] = []
    for primary, satellites in config.regions.items():
        for city in (primary,) + tuple(satellites):
            if city not in ca:
                ca.append(city)
    primaries = [p for p in config.regions]
    ca = primaries + [c for c in ca if c not in primaries]
    entries = [(f"{city}, CA", "CA") for city in ca]
    entries.extend((f"{city}, {state}", state) for city, state in OTHER_CITIES)
    i = 0
    while len(entries) < config.synth_n_msas:
        state = FILLER_STATES[i % len(FILLER_STATES)]
        entries.append((f"Metro {i + 1}, {state}", state))
        i += 1
    return entries[: config.synth_n_msas]


def _factors(
    config: RunConfig, rng: np.random.Generator
) -> Tuple[Dict[str, Series], Dict[str, Series]]:
    """Raw factor levels and their transformed values."""
    n = config.synth_end - config.synth_start + 1
    raw: Dict[str, Series] = {}
    transformed: Dict[str, Series] = {}
    for key, transform in sorted(config.factor_transforms().items()):
        start = config.synth_start
        if key == "UMCSENT":
            start = max(start, UMCSENT_START)
        length = config.synth_end - start + 1
        if transform is FactorTransform.LOG_PCT_CHANGE:
            changes = rng.normal(0.5, 1.0, length - 1)
            logs = np.concatenate([[0.0], np.cumsum(changes) / 100.0])
            raw[key] = Series(key, start, 100.0 * np.exp(logs))
            transformed[key] = Series(key, start + 1, changes)
        else:
            mu = rng.uniform(0.5, 4.0)
            x = np.empty(length)
            x[0] = mu
            shocks = rng.normal(0.0, 0.1, length)
            for t in range(1, length):
                x[t] = mu + LEVEL_FACTOR_PERSISTENCE * (x[t - 1] - mu) + shocks[t]
            raw[key] = Series(key, start, np.exp(x))
            transformed[key] = Series(key, start, x)
    logging.debug("Generated %d factors over %d quarters", len(raw), n)
    return raw, transformed


def _inject_jumps(
    rng: np.random.Generator,
    msa_id: str,
    values: np.ndarray,
    offset: int,
    config: RunConfig,
) -> List[Dict[str, Any]]:
    """Add jumps of synth_jump_size sigma to values in place, after min_history."""
    first = config.synth_start + 1
    size = config.synth_jump_size * config.synth_return_sigma
    candidates = np.arange(offset + config.min_history, len(values))
    count = min(config.synth_jumps_per_msa, len(candidates))
    if count == 0:
        return []
    jumps = []
    for pos in np.sort(rng.choice(candidates, size=count, replace=False)):
        sign = 1.0 if rng.random() < 0.5 else -1.0
        values[pos] += sign * size
        jumps.append({"msa_id": msa_id, "quarter": str(first + int(pos)), "size": sign * size})
    return jumps


def generate(config: RunConfig) -> SynthData:
    """Generate a synthetic panel from the configuration.

    Raises:
      ConfigError: no seed is set
    """
    if config.seed is None:
        raise ConfigError("synthetic data needs a seed", "seed")
    rng = np.random.default_rng(config.seed)
    raw_factors, transformed = _factors(config, rng)
    first = config.synth_start + 1
    n_returns = config.synth_end - first + 1
    keys = sorted(transformed)
    frame = pd.DataFrame({k: transformed[k].to_pandas() for k in keys})
    frame = frame.reindex(pd.RangeIndex(first.ordinal, config.synth_end.ordinal + 1))
    F = frame.to_numpy(dtype=float)
    means = np.nanmean(F, axis=0)
    sds = np.nanstd(F, axis=0)
    sds[sds == 0] = 1.0
    Z = np.nan_to_num((F - means) / sds, nan=0.0)

    sigma = config.synth_return_sigma
    r2 = config.synth_population_r2
    entries = _catalog(config)
    ids = [f"{i + 1:05d}" for i in range(len(entries))]
    by_city = {name.split(",")[0]: msa_id for msa_id, (name, _) in zip(ids, entries)}

    returns: Dict[str, np.ndarray] = {}
    starts: Dict[str, QuarterId] = {}
    loadings: Dict[str, Dict[str, float]] = {}
    lead_lag: List[Dict[str, Any]] = []
    jumps: List[Dict[str, Any]] = []
    satellite_of: Dict[str, str] = {}
    for primary, satellites in config.regions.items():
        for s in satellites:
            if s in by_city and by_city[s] not in satellite_of:
                satellite_of[by_city[s]] = by_city.get(primary, "")
    max_offset = max(0, min(20, n_returns - (config.window_len + 12)))
    c0, c1 = config.synth_lead_coeffs
    for i, msa_id in enumerate(ids):
        primary_id = satellite_of.get(msa_id)
        if primary_id and primary_id in returns:
            p = returns[primary_id]
            noise = rng.normal(0.0, sigma * math.sqrt(1.0 - r2), n_returns)
            values = c0 * p + c1 * np.concatenate([[p[0]], p[:-1]]) + noise
            lead_lag.append(
                {"primary": primary_id, "satellite": msa_id, "coeffs": [c0, c1]}
            )
            starts[msa_id] = config.synth_start
        else:
            beta = rng.normal(0.0, 1.0, len(keys))
            beta /= np.linalg.norm(beta)
            scale = sigma * math.sqrt(r2)
            noise = rng.normal(0.0, sigma * math.sqrt(1.0 - r2), n_returns)
            values = MEAN_RETURN + scale * (Z @ beta) + noise
            loadings[msa_id] = {k: float(scale * b / s) for k, b, s in zip(keys, beta, sds)}
            offset = int(rng.integers(0, max_offset + 1)) if i >= 3 else 0
            starts[msa_id] = config.synth_start + offset
        # Jumps go in before any satellite reads these returns.
        jumps.extend(
            _inject_jumps(rng, msa_id, values, starts[msa_id] - config.synth_start, config)
        )
        returns[msa_id] = values

    levels: Dict[str, Series] = {}
    metadata: Dict[str, MsaMeta] = {}
    for msa_id, (name, state) in zip(ids, entries):
        offset = starts[msa_id] - config.synth_start
        r = returns[msa_id][offset:]
        logs = np.concatenate([[0.0], np.cumsum(r) / 100.0])
        levels[msa_id] = Series(msa_id, starts[msa_id], 100.0 * np.exp(logs))
        metadata[msa_id] = MsaMeta.from_state(msa_id, name, state)

    truth = {
        "seed": config.seed,
        "population_r2": r2,
        "return_sigma": sigma,
        "factor_keys": keys,
        "loadings": loadings,
        "lead_lag": lead_lag,
        "jumps": jumps,
        "msas": {msa_id: metadata[msa_id].name for msa_id in ids},
    }
    logging.info(
        "Generated %d MSAs, %d injected jumps, %d lead-lag satellites",
        len(ids),
        len(jumps),
        len(lead_lag),
    )
    return SynthData(levels, metadata, raw_factors, truth)


def write_synth(config: RunConfig, directory: str) -> RunConfig:
    """Generate a panel and write it with its truth and a matching config.

    Returns:
      the configuration written next to the data
    """
    os.makedirs(directory, exist_ok=True)
    data = generate(config)
    hpi = os.path.join(directory, HPI_FILENAME)
    factors = os.path.join(directory, FACTOR_FILENAME)
    write_hpi_csv(hpi, data.levels, data.metadata)
    write_factor_csv(factors, data.raw_factors)
    write_output_file(
        os.path.join(directory, TRUTH_FILENAME),
        json.dumps(data.truth, indent=2, sort_keys=True) + "\n",
    )
    written = dataclasses.replace(
        config,
        hpi_csv=os.path.abspath(hpi),
        factor_csv=os.path.abspath(factors),
        output_dir=os.path.abspath(os.path.join(directory, "out")),
    )
    write_output_file(
        os.path.join(directory, CONFIG_FILENAME),
        dump_config(written, os.path.abspath(directory)),
    )
    return written
