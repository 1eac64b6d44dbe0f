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

"""The analysis stages and the driver that runs them.

Every stage after ingest reads the ingest outputs from the output
directory, so running the stages one at a time writes the same files
as running them together.
"""

__all__ = [
    "STAGES",
    "run",
    "run_stage",
    "load_inputs",
]

import logging
import math
import os
import re
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import RunConfig, config_echo
from .contagion import ContagionRow, contagion_suite
from .correlations import (
    Kind,
    Mode,
    PairResult,
    division_summary,
    jump_corr_all_pairs,
    return_corr_all_pairs,
    stratify,
)
from .errors import ConfigError
from .figures import FIGURE_TAGS, figure_data, read_panel
from .ingest import (
    FactorPanel,
    factors_from_frame,
    factors_to_frame,
    parse_factor_csv,
    parse_hpi_csv,
    returns_to_frames,
    transform_factors,
)
from .integration import (
    CHARACTERISTICS,
    IntegrationRecord,
    IntegrationSummary,
    california_detail,
    cohort_averages,
    group_averages,
    integration_report,
)
from .jumps import classify_panel, jump_incidence
from .outputs import OutputSession, read_output_frame
from .panel import DIVISION_ORDER, ReturnPanel, Series, build_return_panel

STAGES = ("ingest", "integrate", "jumps", "correlate", "contagion", "figures")


def _input_path(config: RunConfig, key: str) -> str:
    path = getattr(config, key)
    if path is None:
        raise ConfigError(f"{key} is not set", key)
    if not os.path.exists(path):
        raise ConfigError(f"{key} {path} does not exist", key)
    return path


def load_inputs(config: RunConfig) -> Tuple[ReturnPanel, FactorPanel]:
    """Parse the configured input files into a return and a factor panel.

    Raises:
      ConfigError: an input path is unset or missing
      DataError: an input file is invalid
    """
    hpi_path = _input_path(config, "hpi_csv")
    factor_path = _input_path(config, "factor_csv")
    table = parse_hpi_csv(hpi_path)
    panel = build_return_panel(table.levels, table.metadata)
    factors = transform_factors(parse_factor_csv(factor_path), config.factor_transforms())
    return panel, factors


def _read_factors(config: RunConfig) -> FactorPanel:
    frame = read_output_frame(
        config.output_dir,
        "factors.csv",
        "ingest",
        dtype={"quarter": str, "series_id": str},
    )
    return factors_from_frame(frame, config.factor_transforms())


def _series_frame(series: Series, column: str) -> pd.DataFrame:
    return pd.DataFrame(
        {"quarter": [str(q) for q in series.quarters()], column: series.values}
    )


def _diagnostics(rows: Sequence[Tuple[str, ...]], columns: Sequence[str]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=list(columns))


def stage_ingest(config: RunConfig, session: OutputSession) -> None:
    panel, factors = load_inputs(config)
    returns, meta = returns_to_frames(panel.series, panel.metadata)
    session.write_frame("returns.csv", returns)
    session.write_frame("msa_meta.csv", meta)
    session.write_frame("factors.csv", factors_to_frame(factors))


def _record_frame(
    records: Sequence[IntegrationRecord], rank_prefixes: Sequence[str] = ("",)
) -> pd.DataFrame:
    rows = []
    for r in records:
        row = {"msa_id": r.msa_id, "name": r.meta.name, "state": r.meta.state}
        for c in CHARACTERISTICS:
            row[c] = r.value(c)
        for prefix in rank_prefixes:
            for c in CHARACTERISTICS:
                row[f"{prefix}rank_{c}"] = r.ranks[prefix + c]
                row[f"{prefix}quintile_{c}"] = r.quintiles[prefix + c]
        rows.append(row)
    columns = ["msa_id", "name", "state"] + list(CHARACTERISTICS)
    for prefix in rank_prefixes:
        for c in CHARACTERISTICS:
            columns.extend([f"{prefix}rank_{c}", f"{prefix}quintile_{c}"])
    return pd.DataFrame(rows, columns=columns)


def _summary_frame(summaries: Dict[str, IntegrationSummary]) -> pd.DataFrame:
    rows = []
    for c in CHARACTERISTICS:
        if c not in summaries:
            continue
        s = summaries[c]
        rows.append(
            [c, s.n, s.mean, s.std]
            + list(s.quintile_minima)
            + [s.minimum, s.maximum]
        )
    columns = ["characteristic", "n", "mean", "std"]
    columns += [f"q{i}_min" for i in range(1, 6)] + ["min", "max"]
    return pd.DataFrame(rows, columns=columns)


def _trend_groups(config: RunConfig, report) -> Dict[str, Optional[Series]]:
    series = report.series
    metadata = {r.msa_id: r.meta for r in report.records}
    groups: Dict[str, Optional[Series]] = {}
    national = group_averages(series, metadata, "national", groups=["national"])
    groups["national"] = national.series.get("national")
    ca = group_averages(series, metadata, "california", groups=["california"])
    groups["california"] = ca.series.get("california")
    cohorts = cohort_averages(series, config.cohort_starts)
    for i in range(1, len(config.cohort_starts) + 1):
        groups[f"cohort_{i}"] = cohorts.series.get(f"cohort_{i}")
    coast = group_averages(series, metadata, "coast_flag", groups=["coastal", "inland"])
    for g in ("coastal", "inland"):
        groups[g] = coast.series.get(g)
    tags = ["ca" if d == "CA" else f"division_{d}" for d in DIVISION_ORDER]
    divisions = group_averages(series, metadata, "census_division", groups=tags)
    for tag in tags:
        groups[tag] = divisions.series.get(tag)
    return groups


def stage_integrate(config: RunConfig, session: OutputSession) -> None:
    panel = read_panel(config.output_dir)
    factors = _read_factors(config)
    report = integration_report(
        panel, factors, config.report_span, config.window_len, config.prewhiten
    )
    session.write_frame("integration_per_msa.csv", _record_frame(report.records))
    session.write_frame("integration_summary.csv", _summary_frame(report.summaries))
    ca_records, ca_summaries = california_detail(report)
    session.write_frame("table2.csv", _record_frame(ca_records, ("", "ca_")))
    session.write_frame("table2_summary.csv", _summary_frame(ca_summaries))
    rows = []
    diagnostics: List[Tuple[str, str, str]] = []
    for msa_id in sorted(report.series):
        s = report.series[msa_id]
        rows.extend(
            (msa_id, str(q), v) for q, v in zip(s.r2_values.quarters(), s.r2_values.values)
        )
        diagnostics.extend(
            (msa_id, str(q), "rank-deficient window") for q in s.missing
        )
    diagnostics.extend((msa_id, "", "skipped") for msa_id in report.skipped)
    session.write_frame(
        "r2_series.csv", pd.DataFrame(rows, columns=["msa_id", "quarter", "r2"])
    )
    for name, mean in _trend_groups(config, report).items():
        if mean is None:
            frame = pd.DataFrame(columns=["quarter", "mean_r2"])
        else:
            frame = _series_frame(mean, "mean_r2")
        session.write_frame(f"r2_trend_{name}.csv", frame)
    session.write_frame(
        "diagnostics_integrate.csv",
        _diagnostics(diagnostics, ["msa_id", "quarter", "message"]),
    )


INCIDENCE_GROUPS: Dict[str, Callable] = {
    "national": lambda meta: True,
    "coastal": lambda meta: meta.coast_flag.value == "coastal",
    "inland": lambda meta: meta.coast_flag.value == "inland",
}


def _classify(config: RunConfig, panel: ReturnPanel):
    return classify_panel(
        panel, config.min_history, config.jump_thresholds, config.lm_scaled
    )


def stage_jumps(config: RunConfig, session: OutputSession) -> None:
    panel = read_panel(config.output_dir)
    jump_series, skipped = _classify(config, panel)
    rows = []
    for msa_id in sorted(jump_series):
        js = jump_series[msa_id]
        for i, q in enumerate(js.lm_values.quarters()):
            rows.append(
                (
                    msa_id,
                    str(q),
                    js.lm_values.values[i],
                    int(js.jump_10pct[i]),
                    int(js.jump_big[i]),
                )
            )
    session.write_frame(
        "jumps_per_msa.csv",
        pd.DataFrame(rows, columns=["msa_id", "quarter", "lm", "jump165", "jump200"]),
    )
    for group, member in INCIDENCE_GROUPS.items():
        members = [js for k, js in jump_series.items() if member(panel.metadata[k])]
        big = jump_incidence(members, "jump_big")
        low = jump_incidence(members, "jump_10pct")
        frame = pd.DataFrame(
            {
                "quarter": [str(q) for q in big.quarters()],
                "pct": big.values,
                "pct_10pct": low.window(big.start, big.end).values
                if len(big)
                else np.empty(0),
            }
        )
        session.write_frame(f"jump_incidence_{group}.csv", frame)
    session.write_frame(
        "diagnostics_jumps.csv",
        _diagnostics([(k, "too short") for k in skipped], ["msa_id", "message"]),
    )


def _pairs_frame(result: PairResult) -> pd.DataFrame:
    return pd.DataFrame(
        [(p.id_a, p.id_b, p.r, p.n_obs, p.t_stat) for p in result.pairs],
        columns=["id_a", "id_b", "r", "n", "t"],
    )


def stage_correlate(config: RunConfig, session: OutputSession) -> None:
    panel = read_panel(config.output_dir)
    jump_series, _ = _classify(config, panel)
    table3 = []
    table4 = []
    skipped = []
    for kind in Kind:
        for mode in Mode:
            if kind is Kind.RETURN:
                result = return_corr_all_pairs(panel, mode, config.min_return_overlap)
            else:
                result = jump_corr_all_pairs(
                    jump_series,
                    mode,
                    config.jump_gate,
                    config.min_jump_obs,
                    config.jump_corr_centering,
                )
            session.write_frame(
                f"corr_pairs_{kind.value}_{mode.value}.csv", _pairs_frame(result)
            )
            skipped.extend((kind.value, mode.value) + s for s in result.skipped)
            for s in stratify(result.pairs, config.corr_t_thresholds):
                table3.append(
                    (kind.value, mode.value, s.tag, s.n, s.mean, s.sigma, s.mean_t)
                    + (s.maximum, s.minimum)
                )
            for row in division_summary(
                result.pairs, panel.metadata, config.division_t_threshold
            ):
                table4.append((kind.value, mode.value) + tuple(row))
    session.write_frame(
        "table3.csv",
        pd.DataFrame(
            table3,
            columns=["kind", "mode", "stratum", "n", "mean", "sigma", "t", "max", "min"],
        ),
    )
    session.write_frame(
        "table4.csv",
        pd.DataFrame(
            table4,
            columns=[
                "kind",
                "mode",
                "division",
                "n_msas",
                "n_pairs",
                "n_significant",
                "pct_significant",
                "mean_r",
            ],
        ),
    )
    session.write_frame(
        "diagnostics_correlate.csv",
        _diagnostics(skipped, ["kind", "mode", "id_a", "id_b", "reason"]),
    )


def _contagion_terms(n_lags: int, z_lags: Optional[int]) -> List[str]:
    names = ["const"] + [f"lag{j}" for j in range(n_lags + 1)]
    if z_lags is not None:
        names += [f"z_lag{j}" for j in range(z_lags + 1)]
    return names


def primary_slug(name: str) -> str:
    """File name component for a primary MSA, e.g. "los_angeles"."""
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


def _fit_statistics(row: ContagionRow) -> Dict[str, float]:
    f = row.fit
    return dict(
        r2=f.r_squared,
        dw=f.durbin_watson,
        plain_dw=f.plain_durbin_watson,
        dw_lower=f.dw_lower,
        cochrane_orcutt=int(f.co_applied),
        rho=f.rho if f.co_applied else math.nan,
    )


def contagion_table(rows: Sequence[ContagionRow], terms: List[str]) -> pd.DataFrame:
    """Table of one primary: a coefficient row per satellite, then its t-stats.

    The t-stat row leaves satellite, n_obs and the fit statistics empty.
    """
    columns = ["satellite", "stat", "n_obs"] + terms + ["r2", "dw"]
    records = []
    for row in rows:
        f = row.fit
        coefficients = dict(zip(f.fit.names, f.fit.coefficients))
        t_stats = dict(zip(f.fit.names, f.fit.t_stats))
        record = {"satellite": row.satellite, "stat": "coef", "n_obs": f.n_obs}
        record.update(coefficients)
        record.update(r2=f.r_squared, dw=f.durbin_watson)
        records.append(record)
        records.append(dict(t_stats, satellite="", stat="t"))
    return pd.DataFrame(records, columns=columns)


def contagion_long_frame(rows: Sequence[ContagionRow], terms: List[str]) -> pd.DataFrame:
    """One row per primary, satellite and regression term."""
    columns = [
        "primary",
        "satellite",
        "term",
        "coef",
        "t",
        "n_obs",
        "r2",
        "dw",
        "plain_dw",
        "dw_lower",
        "cochrane_orcutt",
        "rho",
    ]
    records = []
    for row in rows:
        f = row.fit
        fitted = {
            name: (c, t)
            for name, c, t in zip(f.fit.names, f.fit.coefficients, f.fit.t_stats)
        }
        statistics = _fit_statistics(row)
        for term in terms:
            coef, t = fitted.get(term, (math.nan, math.nan))
            records.append(
                dict(
                    statistics,
                    primary=row.primary,
                    satellite=row.satellite,
                    term=term,
                    coef=coef,
                    t=t,
                    n_obs=f.n_obs,
                )
            )
    return pd.DataFrame(records, columns=columns)


def _write_contagion_tables(
    session: OutputSession,
    table: str,
    primaries: Sequence[str],
    rows: Sequence[ContagionRow],
    terms: List[str],
) -> None:
    for primary in primaries:
        session.write_frame(
            f"{table}_{primary_slug(primary)}.csv",
            contagion_table([row for row in rows if row.primary == primary], terms),
        )
    session.write_frame(f"{table}_long.csv", contagion_long_frame(rows, terms))


def stage_contagion(config: RunConfig, session: OutputSession) -> None:
    panel = read_panel(config.output_dir)
    suite = contagion_suite(
        config.regions,
        panel,
        config.n_lags,
        config.interaction,
        config.serial_policy,
        config.interaction_lags,
        config.ew_index_mode,
    )
    primaries = list(config.regions)
    _write_contagion_tables(
        session, "table5", primaries, suite.plain, _contagion_terms(config.n_lags, None)
    )
    z_lags = (
        config.n_lags if config.interaction_lags is None else config.interaction_lags
    )
    _write_contagion_tables(
        session,
        "table6",
        primaries,
        suite.interacted,
        _contagion_terms(config.n_lags, z_lags),
    )
    diagnostics = list(suite.skipped)
    for row in suite.plain + suite.interacted:
        diagnostics.extend(
            (row.primary, row.satellite, d) for d in row.fit.diagnostics
        )
    session.write_frame(
        "diagnostics_contagion.csv",
        _diagnostics(diagnostics, ["primary", "satellite", "message"]),
    )


def stage_figures(config: RunConfig, session: OutputSession) -> None:
    for tag in FIGURE_TAGS:
        session.write_frame(f"fig_{tag}.csv", figure_data(config.output_dir, tag, config))


STAGE_FUNCTIONS: Dict[str, Callable[[RunConfig, OutputSession], None]] = {
    "ingest": stage_ingest,
    "integrate": stage_integrate,
    "jumps": stage_jumps,
    "correlate": stage_correlate,
    "contagion": stage_contagion,
    "figures": stage_figures,
}


def run(config: RunConfig, stages: Sequence[str] = STAGES) -> Dict:
    """Run stages in order, writing their outputs and the manifest.

    Outputs of stages that completed before a failure are kept, and the
    manifest marks the failed stage; the exception is re-raised.

    Returns:
      the manifest
    """
    unknown = [s for s in stages if s not in STAGE_FUNCTIONS]
    if unknown:
        raise ConfigError(f"unknown stage {unknown[0]!r}", "stage")
    with OutputSession(config.output_dir, config_echo(config)) as session:
        for stage in stages:
            logging.info("Running stage %s", stage)
            session.begin_stage(stage)
            STAGE_FUNCTIONS[stage](config, session)
            session.end_stage()
        return session.manifest()


def run_stage(config: RunConfig, stage: str) -> Dict:
    return run(config, [stage])
