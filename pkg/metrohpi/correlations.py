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

"""Pairwise return and jump correlations and their stratified summaries."""

__all__ = [
    "Mode",
    "Kind",
    "Centering",
    "PairCorrelation",
    "PairResult",
    "StratumSummary",
    "DivisionRow",
    "return_corr_all_pairs",
    "jump_corr_all_pairs",
    "stratify",
    "division_summary",
]

import logging
import math
from enum import Enum
from typing import Dict, List, Mapping, NamedTuple, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import UndefinedStatistic
from .jumps import JumpSeries
from .linreg import correlation_tstat, mean_corr_tstat
from .panel import DIVISION_ORDER, MsaMeta, ReturnPanel


class Mode(Enum):
    CONTEMPORANEOUS = "contemporaneous"
    LEAD = "lead"


class Kind(Enum):
    RETURN = "return"
    JUMP = "jump"


class Centering(Enum):
    """Where the means of censored jump series are taken."""

    UNION = "union"
    FULL = "full"


class PairCorrelation(NamedTuple):
    """Correlation of one pair.

    In lead mode r is corr(a_t, b_{t+1}), that is a leads b.
    """

    id_a: str
    id_b: str
    mode: Mode
    kind: Kind
    r: float
    n_obs: int
    t_stat: float


class PairResult(NamedTuple):
    pairs: List[PairCorrelation]
    skipped: List[Tuple[str, str, str]]


def _pair_indices(m: int, mode: Mode):
    if mode is Mode.CONTEMPORANEOUS:
        return zip(*np.triu_indices(m, k=1))
    return ((i, j) for i in range(m) for j in range(m))


def _collect(
    ids: Sequence[str],
    r: np.ndarray,
    n: np.ndarray,
    mode: Mode,
    kind: Kind,
    min_obs: int,
) -> PairResult:
    pairs: List[PairCorrelation] = []
    skipped: List[Tuple[str, str, str]] = []
    t = correlation_tstat(np.clip(r, -1.0, 1.0), n)
    for i, j in _pair_indices(len(ids), mode):
        if n[i, j] < min_obs:
            skipped.append((ids[i], ids[j], f"{int(n[i, j])} observations"))
        elif not np.isfinite(r[i, j]):
            skipped.append((ids[i], ids[j], "zero variance"))
        else:
            pairs.append(
                PairCorrelation(
                    ids[i],
                    ids[j],
                    mode,
                    kind,
                    float(min(1.0, max(-1.0, r[i, j]))),
                    int(n[i, j]),
                    float(t[i, j]),
                )
            )
    if skipped:
        logging.info(
            "%s %s correlations: %d pairs skipped", kind.value, mode.value, len(skipped)
        )
    return PairResult(pairs, skipped)


def return_corr_all_pairs(
    panel: ReturnPanel, mode: Mode, min_overlap: int = 8
) -> PairResult:
    """Pearson correlations of returns over each pair's overlapping quarters.

    Contemporaneous mode covers every unordered pair once (id_a < id_b);
    lead mode covers every ordered pair, self-pairs included.
    Pairs with fewer than min_overlap joint quarters or a constant overlap
    are skipped.
    """
    frame = panel.to_frame()
    ids = list(frame.columns)
    m = len(ids)
    if mode is Mode.CONTEMPORANEOUS:
        r = frame.corr(min_periods=min_overlap).to_numpy()
        present = frame.notna().to_numpy(dtype=float)
        n = present.T @ present
    else:
        following = frame.shift(-1)
        joint = pd.concat([frame, following], axis=1, ignore_index=True)
        r = joint.corr(min_periods=min_overlap).to_numpy()[:m, m:]
        n = frame.notna().to_numpy(dtype=float).T @ following.notna().to_numpy(dtype=float)
    return _collect(ids, r, n, mode, Kind.RETURN, min_overlap)


def jump_corr_all_pairs(
    jump_series: Mapping[str, JumpSeries],
    mode: Mode,
    gate: float = 2.0,
    min_obs: int = 3,
    centering: Centering = Centering.UNION,
) -> PairResult:
    """Censored correlations of LM statistics.

    Each MSA's LM series is zeroed where |LM| <= gate. A pair is correlated
    over the quarters where both statistics are defined and at least one
    member jumps. With UNION centering the means are taken over those
    quarters; with FULL centering over every quarter both are defined.
    """
    ids = sorted(jump_series)
    frame = pd.DataFrame(
        {k: jump_series[k].censored(gate).to_pandas() for k in ids}
    ).sort_index()
    if len(frame):
        frame = frame.reindex(
            pd.RangeIndex(int(frame.index[0]), int(frame.index[-1]) + 1)
        )
    left = frame
    right = frame if mode is Mode.CONTEMPORANEOUS else frame.shift(-1)

    def parts(f: pd.DataFrame) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        defined = f.notna().to_numpy(dtype=float)
        values = f.fillna(0.0).to_numpy(dtype=float)
        jumps = (values != 0).astype(float)
        return defined, values, jumps

    dl, xl, jl = parts(left)
    dr, xr, jr = parts(right)
    n = jl.T @ dr + dl.T @ jr - jl.T @ jr
    s_a = xl.T @ dr
    s_b = dl.T @ xr
    s_aa = (xl * xl).T @ dr
    s_bb = dl.T @ (xr * xr)
    s_ab = xl.T @ xr
    with np.errstate(divide="ignore", invalid="ignore"):
        if centering is Centering.UNION:
            mu_a = s_a / n
            mu_b = s_b / n
        else:
            full = dl.T @ dr
            mu_a = s_a / full
            mu_b = s_b / full
        cov = s_ab - mu_a * s_b - mu_b * s_a + n * mu_a * mu_b
        var_a = s_aa - 2 * mu_a * s_a + n * mu_a * mu_a
        var_b = s_bb - 2 * mu_b * s_b + n * mu_b * mu_b
        degenerate = (var_a <= 1e-12 * s_aa) | (var_b <= 1e-12 * s_bb)
        r = np.where(degenerate, np.nan, cov / np.sqrt(var_a * var_b))
    return _collect(ids, r, n, mode, Kind.JUMP, min_obs)


class StratumSummary(NamedTuple):
    tag: str
    n: int
    mean: float
    sigma: float
    mean_t: float
    maximum: float
    minimum: float

    @property
    def defined(self) -> bool:
        return self.n > 0


def _stratum(tag: str, rs: np.ndarray) -> StratumSummary:
    n = len(rs)
    if n == 0:
        logging.debug("Stratum %s is empty", tag)
        return StratumSummary(tag, 0, math.nan, math.nan, math.nan, math.nan, math.nan)
    mean = float(rs.mean())
    sigma = float(rs.std(ddof=1)) if n > 1 else math.nan
    try:
        mean_t = mean_corr_tstat(mean, sigma, n)
    except UndefinedStatistic:
        mean_t = math.nan
    return StratumSummary(tag, n, mean, sigma, mean_t, float(rs.max()), float(rs.min()))


def stratify(
    pairs: Sequence[PairCorrelation], thresholds: Sequence[float] = (2.0, 3.0)
) -> List[StratumSummary]:
    """Summaries of all pairs and of the pairs with t above each threshold."""
    r = np.array([p.r for p in pairs], dtype=float)
    t = np.array([p.t_stat for p in pairs], dtype=float)
    rows = [_stratum("all", r)]
    for threshold in thresholds:
        rows.append(_stratum(f"t>{threshold:g}", r[t > threshold]))
    return rows


class DivisionRow(NamedTuple):
    division: str
    n_msas: int
    n_pairs: int
    n_significant: int
    pct_significant: float
    mean_r: float


def division_summary(
    pairs: Sequence[PairCorrelation],
    metadata: Mapping[str, MsaMeta],
    t_threshold: float = 5.0,
) -> List[DivisionRow]:
    """Within-division pair counts, significant shares and mean correlations.

    Only pairs with both members in the same division count; California
    is a division of its own.
    """
    members: Dict[str, int] = {}
    for meta in metadata.values():
        members[meta.division_tag] = members.get(meta.division_tag, 0) + 1
    rs: Dict[str, List[float]] = {}
    significant: Dict[str, int] = {}
    for p in pairs:
        a = metadata[p.id_a].division_tag
        if a != metadata[p.id_b].division_tag:
            continue
        rs.setdefault(a, []).append(p.r)
        if p.t_stat > t_threshold:
            significant[a] = significant.get(a, 0) + 1
    rows = []
    for division in DIVISION_ORDER:
        tag = "ca" if division == "CA" else f"division_{division}"
        if tag not in members:
            continue
        values = rs.get(tag, [])
        n_sig = significant.get(tag, 0)
        rows.append(
            DivisionRow(
                tag,
                members[tag],
                len(values),
                n_sig,
                100.0 * n_sig / len(values) if values else math.nan,
                float(np.mean(values)) if values else math.nan,
            )
        )
    return rows
