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

"""Plot data for the price index, integration and jump incidence figures."""

__all__ = [
    "FIGURE_TAGS",
    "figure_data",
    "index_levels",
    "read_panel",
]

import logging
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from .config import RunConfig
from .errors import DataError
from .ingest import returns_from_frames
from .outputs import read_output_frame
from .panel import QuarterId, ReturnPanel, equal_weighted_log_index

FIGURE_TAGS = ("fig1", "fig2a", "fig2b", "fig2c", "fig3a", "fig3b")


def read_panel(directory: str) -> ReturnPanel:
    """Return panel written by the ingest stage.

    Raises:
      StageError: the ingest outputs are missing
    """
    returns = read_output_frame(
        directory, "returns.csv", "ingest", dtype={"msa_id": str, "quarter": str}
    )
    meta = read_output_frame(
        directory, "msa_meta.csv", "ingest", dtype={"msa_id": str, "state": str}
    )
    series, metadata = returns_from_frames(returns, meta)
    return ReturnPanel(series, metadata)


def index_levels(
    panel: ReturnPanel, base: QuarterId, mode: str = "log"
) -> Optional[pd.Series]:
    """Equal-weighted index of the MSAs covering base, 100 at base.

    Returns None when no MSA covers base.
    """
    members = [k for k, s in panel.series.items() if s.start <= base <= s.end]
    if not members:
        return None
    index = equal_weighted_log_index(panel, members, mode).to_pandas()
    if base.ordinal not in index.index:
        return None
    return 100.0 * np.exp(index - index[base.ordinal])


def _fig1(directory: str, config: RunConfig) -> List[Tuple[str, pd.Series]]:
    panel = read_panel(directory)
    base = config.fig1_base
    us = index_levels(panel, base, config.ew_index_mode)
    if us is None:
        raise DataError(f"no MSA covers the base quarter {base}")
    columns = [("us", us)]
    california = panel.select(lambda meta: meta.state == "CA")
    ca = index_levels(california, base, config.ew_index_mode) if len(california) else None
    if ca is None:
        logging.warning("No California MSA covers %s; ca column left empty", base)
        ca = pd.Series(np.nan, index=us.index)
    columns.append(("ca", ca))
    return columns


def _trend(directory: str, stage: str, name: str, column: str) -> pd.Series:
    frame = read_output_frame(directory, name, stage, dtype={"quarter": str})
    ordinals = [QuarterId.parse(q).ordinal for q in frame["quarter"]]
    return pd.Series(frame[column].to_numpy(dtype=float), index=ordinals)


def _r2_columns(directory: str, groups: List[str]) -> List[Tuple[str, pd.Series]]:
    return [
        (g, _trend(directory, "integrate", f"r2_trend_{g}.csv", "mean_r2"))
        for g in groups
    ]


def _incidence_columns(
    directory: str, groups: List[str]
) -> List[Tuple[str, pd.Series]]:
    columns = []
    for g in groups:
        name = f"jump_incidence_{g}.csv"
        columns.append((g, _trend(directory, "jumps", name, "pct")))
        columns.append((f"{g}_10pct", _trend(directory, "jumps", name, "pct_10pct")))
    return columns


def _join(columns: List[Tuple[str, pd.Series]]) -> pd.DataFrame:
    frame = pd.DataFrame({label: s for label, s in columns}).sort_index()
    frame.insert(0, "quarter", [str(QuarterId(int(o))) for o in frame.index])
    return frame.reset_index(drop=True)


def figure_data(directory: str, tag: str, config: RunConfig) -> pd.DataFrame:
    """Plot data of one figure from the stage outputs in directory.

    fig1 holds the US and California equal-weighted price indices, 100 at
    the configured base quarter; fig2a to fig2c hold mean R² series
    (national and California, cohorts, coastal and inland California);
    fig3a and fig3b hold jump incidence percentages (national, coastal
    and inland California).

    Raises:
      StageError: a prerequisite stage output is missing
    """
    if tag == "fig1":
        columns = _fig1(directory, config)
    elif tag == "fig2a":
        columns = _r2_columns(directory, ["national", "california"])
    elif tag == "fig2b":
        cohorts = [f"cohort_{i}" for i in range(1, len(config.cohort_starts) + 1)]
        columns = _r2_columns(directory, cohorts)
    elif tag == "fig2c":
        columns = _r2_columns(directory, ["coastal", "inland"])
    elif tag == "fig3a":
        columns = _incidence_columns(directory, ["national"])
    elif tag == "fig3b":
        columns = _incidence_columns(directory, ["coastal", "inland"])
    else:
        raise ValueError(f"unknown figure {tag!r}")
    return _join(columns)
