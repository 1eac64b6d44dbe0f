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

"""Lead-lag regressions of satellite MSA returns on a primary MSA."""

__all__ = [
    "Interaction",
    "SerialPolicy",
    "ContagionSpec",
    "Design",
    "ContagionFit",
    "ContagionRow",
    "SuiteResult",
    "build_design",
    "boom_bust_residual",
    "interaction_index",
    "fit_contagion",
    "contagion_suite",
]

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    InsufficientOverlap,
    NumericalError,
    SeriesTooShort,
)
from .linreg import (
    RegressionFit,
    cochrane_orcutt,
    dw_lower_bound,
    ols_fit,
    time_trend_fit,
)
from .panel import (
    QuarterId,
    ReturnPanel,
    Series,
    equal_weighted_log_index,
    log_level,
)

MIN_SPARE_OBSERVATIONS = 12


class Interaction(Enum):
    NONE = "none"
    PRIMARY_CITY_RESIDUAL = "primary_city_residual"
    EQUAL_WEIGHT_CA_RESIDUAL = "equal_weight_ca_residual"


class SerialPolicy(Enum):
    PLAIN = "plain"
    AUTO_COCHRANE_ORCUTT = "auto_cochrane_orcutt"
    FORCE_COCHRANE_ORCUTT = "force_cochrane_orcutt"


@dataclass(frozen=True)
class ContagionSpec:
    primary_msa: str
    satellite_msa: str
    n_lags: int = 3
    interaction: Interaction = Interaction.NONE
    serial_policy: SerialPolicy = SerialPolicy.AUTO_COCHRANE_ORCUTT
    interaction_lags: Optional[int] = None

    def __post_init__(self):
        if self.n_lags < 0:
            raise ConfigError(f"n_lags must be >= 0, got {self.n_lags}", "n_lags")
        if self.interaction_lags is not None and self.interaction_lags < 0:
            raise ConfigError(
                f"interaction_lags must be >= 0, got {self.interaction_lags}",
                "interaction_lags",
            )
        if self.primary_msa == self.satellite_msa:
            raise ConfigError(f"{self.primary_msa} cannot be its own satellite")

    @property
    def effective_interaction_lags(self) -> int:
        if self.interaction_lags is None:
            return self.n_lags
        return self.interaction_lags

    @property
    def n_params(self) -> int:
        n = 1 + self.n_lags + 1
        if self.interaction is not Interaction.NONE:
            n += self.effective_interaction_lags + 1
        return n

    def column_names(self) -> Tuple[str, ...]:
        names = ["const"] + [f"lag{j}" for j in range(self.n_lags + 1)]
        if self.interaction is not Interaction.NONE:
            names.extend(f"z_lag{j}" for j in range(self.effective_interaction_lags + 1))
        return tuple(names)


class Design(NamedTuple):
    quarters: Tuple[QuarterId, ...]
    y: np.ndarray
    X: np.ndarray
    names: Tuple[str, ...]

    @property
    def n_obs(self) -> int:
        return len(self.y)


def build_design(
    satellite: Series,
    primary: Series,
    spec: ContagionSpec,
    z: Optional[Series] = None,
) -> Design:
    """Regressand and regressors for one satellite.

    Observations run over the quarters both series share, less the lag
    loss at the start; an interaction further restricts them to the
    quarters z covers.

    Raises:
      InsufficientOverlap: fewer than 12 observations beyond the
        parameter count
    """
    interacted = spec.interaction is not Interaction.NONE
    if interacted and z is None:
        raise ValueError("an interaction design needs the boom/bust residual")
    lags = spec.n_lags
    z_lags = spec.effective_interaction_lags if interacted else 0
    first = max(satellite.start, primary.start) + max(lags, z_lags)
    last = min(satellite.end, primary.end)
    if interacted:
        first = max(first, z.start)
        last = min(last, z.end)
    n_obs = max(0, last - first + 1)
    required = MIN_SPARE_OBSERVATIONS + spec.n_params
    if n_obs < required:
        raise InsufficientOverlap(n_obs, required)

    def shifted(s: Series, lag: int) -> np.ndarray:
        return s.window(first - lag, last - lag).values

    y = satellite.window(first, last).values
    columns = [np.ones(n_obs)]
    columns.extend(shifted(primary, j) for j in range(lags + 1))
    if interacted:
        zt = z.window(first, last).values
        columns.extend(shifted(primary, j) * zt for j in range(z_lags + 1))
    quarters = tuple(first + i for i in range(n_obs))
    return Design(quarters, y, np.column_stack(columns), spec.column_names())


def boom_bust_residual(log_index: Series) -> Series:
    """Deviation of a log price index from its linear time trend.

    Raises:
      SeriesTooShort: fewer than 12 quarters
    """
    if len(log_index) < 12:
        raise SeriesTooShort(log_index.key, len(log_index), 12)
    return Series(log_index.key, log_index.start, time_trend_fit(log_index.values).residuals)


def interaction_index(
    spec: ContagionSpec,
    panel: ReturnPanel,
    ew_index_mode: str = "log",
) -> Optional[Series]:
    """Boom/bust residual for the interaction variant of a contagion model."""
    if spec.interaction is Interaction.NONE:
        return None
    if spec.interaction is Interaction.PRIMARY_CITY_RESIDUAL:
        return boom_bust_residual(log_level(panel[spec.primary_msa]))
    california = panel.select(lambda meta: meta.state == "CA").msa_ids
    if not california:
        raise DataError("no California MSAs for the equal-weighted index")
    return boom_bust_residual(equal_weighted_log_index(panel, california, ew_index_mode))


@dataclass(frozen=True)
class ContagionFit:
    """Final fit of one satellite regression.

    When co_applied, coefficients come from the Cochrane-Orcutt fit on
    quasi-differenced data (one observation fewer) and rho is its
    autocorrelation; plain_durbin_watson is always that of the OLS fit.
    """

    spec: ContagionSpec
    n_obs: int
    fit: RegressionFit
    co_applied: bool
    rho: float
    plain_durbin_watson: float
    dw_lower: float
    diagnostics: Tuple[str, ...] = ()

    @property
    def r_squared(self) -> float:
        return self.fit.r_squared

    @property
    def durbin_watson(self) -> float:
        return self.fit.durbin_watson

    @property
    def constant(self) -> Tuple[float, float]:
        return self.fit.coefficient("const"), self.fit.t_stat("const")

    @property
    def lag_coeffs(self) -> List[float]:
        return [self.fit.coefficient(f"lag{j}") for j in range(self.spec.n_lags + 1)]

    @property
    def interaction_coeffs(self) -> Optional[List[float]]:
        if self.spec.interaction is Interaction.NONE:
            return None
        return [
            self.fit.coefficient(f"z_lag{j}")
            for j in range(self.spec.effective_interaction_lags + 1)
        ]

    @property
    def interaction_tstats(self) -> Optional[List[float]]:
        if self.spec.interaction is Interaction.NONE:
            return None
        return [
            self.fit.t_stat(f"z_lag{j}")
            for j in range(self.spec.effective_interaction_lags + 1)
        ]


def _pad_zero_columns(fit: RegressionFit, names: Tuple[str, ...]) -> RegressionFit:
    n_zero = len(names) - len(fit.names)
    return RegressionFit(
        names=names,
        coefficients=np.concatenate([fit.coefficients, np.zeros(n_zero)]),
        std_errors=np.concatenate([fit.std_errors, np.zeros(n_zero)]),
        t_stats=np.concatenate([fit.t_stats, np.zeros(n_zero)]),
        r_squared=fit.r_squared,
        residuals=fit.residuals,
        n_obs=fit.n_obs,
        n_params=fit.n_params,
        durbin_watson=fit.durbin_watson,
    )


def _fit_design(
    design: Design, spec: ContagionSpec, corrected: bool = False
) -> Tuple[RegressionFit, float, int]:
    X, names = design.X, design.names
    n_free = spec.n_lags + 2
    # Identically zero interaction columns are constrained to zero
    # coefficients; the remaining columns are fitted alone.
    constrained = len(names) > n_free and not np.any(np.abs(X[:, n_free:]) > 1e-12)
    if constrained:
        X, names = X[:, :n_free], names[:n_free]
    if corrected:
        result = cochrane_orcutt(X, design.y, names)
        fit, rho, iterations = result.fit, result.rho, result.iterations
    else:
        fit, rho, iterations = ols_fit(X, design.y, names), math.nan, 0
    if constrained:
        fit = _pad_zero_columns(fit, design.names)
    return fit, rho, iterations


def fit_contagion(
    spec: ContagionSpec,
    panel: ReturnPanel,
    z: Optional[Series] = None,
    ew_index_mode: str = "log",
) -> ContagionFit:
    """Fit one satellite regression, with Cochrane-Orcutt if called for.

    Under AUTO_COCHRANE_ORCUTT the correction is applied when the OLS
    Durbin-Watson statistic is below the 5% lower bound for the
    regression's observation and parameter counts. A failed correction
    leaves the OLS fit in place and is noted in diagnostics.

    Args:
      spec: regression specification
      panel: return panel holding both MSAs
      z: boom/bust residual for the interaction; derived from the panel
        when not given
      ew_index_mode: averaging mode of the equal-weighted index
    """
    if z is None:
        z = interaction_index(spec, panel, ew_index_mode)
    design = build_design(panel[spec.satellite_msa], panel[spec.primary_msa], spec, z)
    plain, _, _ = _fit_design(design, spec)
    dw_lower = dw_lower_bound(design.n_obs, plain.n_params)
    wants_co = spec.serial_policy is SerialPolicy.FORCE_COCHRANE_ORCUTT or (
        spec.serial_policy is SerialPolicy.AUTO_COCHRANE_ORCUTT
        and math.isfinite(plain.durbin_watson)
        and plain.durbin_watson < dw_lower
    )
    if not wants_co:
        return ContagionFit(
            spec, design.n_obs, plain, False, math.nan, plain.durbin_watson, dw_lower
        )
    try:
        final, rho, iterations = _fit_design(design, spec, corrected=True)
    except NumericalError as e:
        logging.warning(
            "%s on %s: Cochrane-Orcutt failed, keeping OLS: %s",
            spec.satellite_msa,
            spec.primary_msa,
            e,
        )
        return ContagionFit(
            spec,
            design.n_obs,
            plain,
            False,
            math.nan,
            plain.durbin_watson,
            dw_lower,
            (f"cochrane-orcutt failed: {e}",),
        )
    logging.debug(
        "%s on %s: Cochrane-Orcutt rho %.4f after %d iterations",
        spec.satellite_msa,
        spec.primary_msa,
        rho,
        iterations,
    )
    return ContagionFit(
        spec, final.n_obs, final, True, rho, plain.durbin_watson, dw_lower
    )


class ContagionRow(NamedTuple):
    primary: str
    satellite: str
    fit: ContagionFit


class SuiteResult(NamedTuple):
    plain: List[ContagionRow]
    interacted: List[ContagionRow]
    skipped: List[Tuple[str, str, str]]


def contagion_suite(
    regions: Mapping[str, Sequence[str]],
    panel: ReturnPanel,
    n_lags: int = 3,
    interaction: Interaction = Interaction.PRIMARY_CITY_RESIDUAL,
    serial_policy: SerialPolicy = SerialPolicy.AUTO_COCHRANE_ORCUTT,
    interaction_lags: Optional[int] = None,
    ew_index_mode: str = "log",
) -> SuiteResult:
    """Plain and interaction fits for every primary and satellite in regions.

    Names in regions may be MSA ids or names. Rows keep the order of the
    region mapping; unknown MSAs and satellites without enough overlap
    are skipped with a diagnostic.
    """
    plain_rows: List[ContagionRow] = []
    interacted_rows: List[ContagionRow] = []
    skipped: List[Tuple[str, str, str]] = []
    ca_z: Optional[Series] = None
    for primary_name, satellites in regions.items():
        primary = panel.resolve(primary_name)
        if primary is None:
            logging.warning("Primary MSA %s not in panel; skipped", primary_name)
            for satellite_name in satellites:
                skipped.append((primary_name, satellite_name, "primary not in panel"))
            continue
        for satellite_name in satellites:
            satellite = panel.resolve(satellite_name)
            if satellite is None:
                logging.warning("Satellite MSA %s not in panel; skipped", satellite_name)
                skipped.append((primary_name, satellite_name, "satellite not in panel"))
                continue
            if satellite == primary:
                logging.warning(
                    "Satellite %s is primary %s (MSA %s); skipped",
                    satellite_name,
                    primary_name,
                    primary,
                )
                skipped.append((primary_name, satellite_name, "satellite is the primary"))
                continue
            variants = [(Interaction.NONE, plain_rows)]
            if interaction is not Interaction.NONE:
                variants.append((interaction, interacted_rows))
            for variant, rows in variants:
                spec = ContagionSpec(
                    primary, satellite, n_lags, variant, serial_policy, interaction_lags
                )
                try:
                    z = None
                    if variant is Interaction.EQUAL_WEIGHT_CA_RESIDUAL:
                        if ca_z is None:
                            ca_z = interaction_index(spec, panel, ew_index_mode)
                        z = ca_z
                    fit = fit_contagion(spec, panel, z, ew_index_mode)
                except (DataError, NumericalError) as e:
                    logging.warning(
                        "%s on %s (%s): skipped: %s",
                        satellite_name,
                        primary_name,
                        variant.value,
                        e,
                    )
                    skipped.append((primary_name, satellite_name, f"{variant.value}: {e}"))
                    continue
                rows.append(ContagionRow(primary_name, satellite_name, fit))
    return SuiteResult(plain_rows, interacted_rows, skipped)
