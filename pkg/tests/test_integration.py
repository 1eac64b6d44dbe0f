#!/usr/bin/python
# Copyright (C) 2026 The metrohpi authors
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

"""Tests for metrohpi.integration."""

import math

import numpy as np

from metrohpi.errors import DataError, InsufficientObservations, SeriesTooShort
from metrohpi.ingest import FactorPanel, FactorTransform
from metrohpi.integration import (
    CHARACTERISTICS,
    IntegrationSeries,
    california_detail,
    cohort_averages,
    group_averages,
    integration_report,
    prewhiten,
    quintile_bin,
    rolling_r2,
)
from metrohpi.linreg import ols_fit, time_trend_fit
from metrohpi.panel import MsaMeta, QuarterId, Series

from . import TestCase, make_panel

START = QuarterId.parse("1980Q1")


def random_factors(rng, n_factors, length, start=START):
    factors = {
        f"F{i:02d}": Series(f"F{i:02d}", start, rng.normal(size=length))
        for i in range(n_factors)
    }
    return FactorPanel(factors, {k: FactorTransform.LOG_LEVEL for k in factors})


def r2_series(msa_id, start, values):
    r2 = Series(msa_id, QuarterId.parse(start), values)
    return IntegrationSeries(msa_id, r2, 20, values[-1], values[-1] - values[0], 0.0)


class PrewhitenTests(TestCase):
    def test_exact_ar1(self):
        v = [0.0]
        for _ in range(11):
            v.append(1.0 + 0.5 * v[-1])
        result = prewhiten(Series("a", START, v))
        self.assertAlmostEqual(1.0, result.constant)
        self.assertAlmostEqual(0.5, result.rho)
        self.assertFalse(result.constant_input)
        self.assertEqual(START + 1, result.residuals.start)
        self.assertEqual(11, len(result.residuals))
        np.testing.assert_allclose(result.residuals.values, 0.0, atol=1e-8)

    def test_residuals_uncorrelated_with_lag(self):
        rng = np.random.default_rng(3)
        e = rng.normal(size=200)
        v = np.empty(200)
        v[0] = e[0]
        for t in range(1, 200):
            v[t] = 0.7 * v[t - 1] + e[t]
        result = prewhiten(Series("a", START, v))
        self.assertAlmostEqual(0.7, result.rho, delta=0.15)
        # Least squares residuals are orthogonal to the lagged regressor.
        self.assertAlmostEqual(0.0, float(result.residuals.values @ v[:-1]), places=6)

    def test_constant_input(self):
        with self.assertLogs(level="WARNING"):
            result = prewhiten(Series("a", START, [2.0] * 10))
        self.assertTrue(result.constant_input)
        self.assertEqual(9, len(result.residuals))
        self.assertTrue(np.all(result.residuals.values == 0))

    def test_too_short(self):
        with self.assertRaises(SeriesTooShort):
            prewhiten(Series("a", START, [1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0]))


class RollingR2Tests(TestCase):
    def test_exact_linear_combination(self):
        rng = np.random.default_rng(1)
        factors = random_factors(rng, 3, 40)
        f = [factors.factors[k].values for k in factors.keys]
        y = Series("a", START, 1.0 + 2.0 * f[0] - 0.5 * f[1] + 3.0 * f[2])
        s = rolling_r2(y, factors, window=20)
        self.assertEqual(21, len(s.r2_values))
        np.testing.assert_allclose(s.r2_values.values, 1.0, atol=1e-8)

    def test_dated_at_window_end(self):
        rng = np.random.default_rng(2)
        factors = random_factors(rng, 2, 60)
        y = Series("a", START + 5, rng.normal(size=40))
        s = rolling_r2(y, factors, window=20)
        self.assertEqual(START + 5 + 19, s.r2_values.start)
        self.assertEqual(21, len(s.r2_values))
        self.assertTrue(np.all((s.r2_values.values >= 0) & (s.r2_values.values <= 1)))

    def test_factor_coverage_limits_windows(self):
        rng = np.random.default_rng(4)
        factors = random_factors(rng, 2, 30, start=START + 10)
        y = Series("a", START, rng.normal(size=50))
        s = rolling_r2(y, factors, window=20)
        self.assertEqual(START + 29, s.r2_values.start)
        self.assertEqual(11, len(s.r2_values))

    def test_full_sample_window(self):
        rng = np.random.default_rng(5)
        factors = random_factors(rng, 2, 30)
        y = rng.normal(size=30)
        s = rolling_r2(Series("a", START, y), factors, window=30)
        self.assertEqual(1, len(s.r2_values))
        X = np.column_stack(
            [np.ones(30)] + [factors.factors[k].values for k in factors.keys]
        )
        self.assertAlmostEqual(ols_fit(X, y).r_squared, s.r2_values.values[0])
        self.assertAlmostEqual(s.final_r2, s.r2_values.values[0])
        self.assertEqual(0.0, s.change_r2)
        self.assertTrue(math.isnan(s.trend_t))

    def test_no_complete_window(self):
        rng = np.random.default_rng(6)
        factors = random_factors(rng, 2, 40)
        with self.assertLogs(level="WARNING"):
            s = rolling_r2(Series("a", START, rng.normal(size=10)), factors, window=20)
        self.assertTrue(s.skipped)
        self.assertTrue(math.isnan(s.final_r2))

    def test_window_too_short_for_regressors(self):
        rng = np.random.default_rng(7)
        factors = random_factors(rng, 3, 40)
        with self.assertRaises(InsufficientObservations):
            rolling_r2(Series("a", START, rng.normal(size=40)), factors, window=5)

    def test_rank_deficient_window_recorded_missing(self):
        rng = np.random.default_rng(8)
        flat = np.concatenate([np.zeros(20), rng.normal(size=20)])
        factors = FactorPanel(
            {
                "F00": Series("F00", START, flat),
                "F01": Series("F01", START, rng.normal(size=40)),
            },
            {"F00": FactorTransform.LOG_LEVEL, "F01": FactorTransform.LOG_LEVEL},
        )
        with self.assertLogs(level="WARNING"):
            s = rolling_r2(Series("a", START, rng.normal(size=40)), factors, window=20)
        self.assertEqual((START + 19,), s.missing)
        self.assertTrue(math.isnan(s.r2_values.values[0]))
        self.assertTrue(np.all(np.isfinite(s.r2_values.values[1:])))

    def test_report_span_statistics(self):
        rng = np.random.default_rng(9)
        factors = random_factors(rng, 2, 60)
        s = rolling_r2(
            Series("a", START, rng.normal(size=60)),
            factors,
            window=20,
            report_span=(START + 30, START + 50),
        )
        in_span = s.r2_values.window(START + 30, START + 50).values
        self.assertEqual(in_span[-1], s.final_r2)
        self.assertAlmostEqual(in_span[-1] - in_span[0], s.change_r2)
        self.assertAlmostEqual(time_trend_fit(in_span).slope_t_stat, s.trend_t)

    def test_null_mean_matches_finite_sample_expectation(self):
        rng = np.random.default_rng(11)
        factors = random_factors(rng, 12, 100)
        means = []
        for i in range(40):
            y = Series(f"{i}", START, rng.normal(size=100))
            means.append(np.mean(rolling_r2(y, factors, window=20).r2_values.values))
        mean = float(np.mean(means))
        self.assertGreaterEqual(mean, 0.58)
        self.assertLessEqual(mean, 0.68)
        self.assertAlmostEqual(12 / 19, mean, delta=0.05)

    def test_long_window_recovers_population_r2(self):
        rng = np.random.default_rng(12)
        factors = random_factors(rng, 2, 200)
        f = np.column_stack([factors.factors[k].values for k in factors.keys])
        beta = np.array([0.6, 0.8])
        means = []
        for i in range(20):
            # Unit-variance signal and unit-variance noise.
            y = f @ beta + rng.normal(size=200)
            s = rolling_r2(Series(f"{i}", START, y), factors, window=80)
            means.append(np.mean(s.r2_values.values))
        mean = float(np.mean(means))
        self.assertGreaterEqual(mean, 0.45)
        self.assertLessEqual(mean, 0.55)


class QuintileBinTests(TestCase):
    def test_bins(self):
        self.assertEqual(1, quintile_bin(1, 1))
        self.assertEqual([1, 1, 2, 2, 3, 3, 4, 4, 5, 5], [quintile_bin(r, 10) for r in range(1, 11)])
        self.assertEqual([1, 2, 3], [quintile_bin(r, 3) for r in range(1, 4)])
        self.assertEqual([1, 2, 3, 4, 5, 5], [quintile_bin(r, 6) for r in range(1, 7)])

    def test_ceiling_formula(self):
        for n in (5, 7, 10, 35, 384):
            self.assertEqual(
                [math.ceil(5 * r / n) for r in range(1, n + 1)],
                [quintile_bin(r, n) for r in range(1, n + 1)],
            )

    def test_384_msas(self):
        bins = [quintile_bin(r, 384) for r in range(1, 385)]
        self.assertEqual([76, 77, 77, 77, 77], [bins.count(q) for q in range(1, 6)])
        self.assertEqual([1, 2], [quintile_bin(76, 384), quintile_bin(77, 384)])
        self.assertEqual([3, 4], [quintile_bin(230, 384), quintile_bin(231, 384)])
        self.assertEqual([4, 5], [quintile_bin(307, 384), quintile_bin(308, 384)])


class IntegrationReportTests(TestCase):
    def setUp(self):
        super().setUp()
        rng = np.random.default_rng(21)
        self.factors = random_factors(rng, 2, 61)
        f = np.column_stack([self.factors.factors[k].values for k in self.factors.keys])
        returns = {}
        for name, weight in [
            ("Los Angeles, CA", 2.0),
            ("Fresno, CA", 0.5),
            ("Seattle, WA", 1.0),
            ("Boise, ID", 0.0),
        ]:
            returns[name] = 1.0 + weight * (f @ np.array([1.0, -1.0])) + rng.normal(size=61)
        returns["Tiny, TX"] = rng.normal(size=6)
        self.panel = make_panel(returns)
        self.span = (START + 30, START + 60)

    def test_records_and_skips(self):
        with self.assertLogs(level="WARNING"):
            report = integration_report(self.panel, self.factors, self.span)
        self.assertEqual(["00005"], report.skipped)
        self.assertEqual(["00001", "00002", "00003", "00004"], [r.msa_id for r in report.records])
        for c in CHARACTERISTICS:
            self.assertEqual([1, 2, 3, 4], sorted(r.ranks[c] for r in report.records))
            self.assertEqual(
                sorted(quintile_bin(rank, 4) for rank in range(1, 5)),
                sorted(r.quintiles[c] for r in report.records),
            )
        # Prewhitened series lose a quarter before the first window.
        self.assertEqual(START + 20, report.series["00001"].r2_values.start)
        la = report.record("00001")
        raw = self.panel["00001"].window(*self.span).values
        self.assertAlmostEqual(raw.mean(), la.mean_return)
        self.assertAlmostEqual(raw.std(ddof=1), la.sigma)
        self.assertGreater(la.final_r2, report.record("00004").final_r2)

    def test_summaries(self):
        with self.assertLogs(level="WARNING"):
            report = integration_report(self.panel, self.factors, self.span)
        for c in CHARACTERISTICS:
            summary = report.summaries[c]
            values = [r.value(c) for r in report.records]
            self.assertEqual(4, summary.n)
            self.assertAlmostEqual(np.mean(values), summary.mean)
            self.assertAlmostEqual(np.std(values, ddof=1), summary.std)
            self.assertAlmostEqual(min(values), summary.minimum)
            self.assertAlmostEqual(max(values), summary.maximum)
            finite = [m for m in summary.quintile_minima if not math.isnan(m)]
            self.assertEqual(sorted(finite), finite)

    def test_single_msa(self):
        panel = self.panel.subset(["00003"])
        report = integration_report(panel, self.factors, self.span)
        record = report.records[0]
        self.assertEqual({c: 1 for c in CHARACTERISTICS}, record.ranks)
        self.assertEqual({c: 1 for c in CHARACTERISTICS}, record.quintiles)

    def test_raw_returns(self):
        panel = self.panel.subset(["00001"])
        report = integration_report(panel, self.factors, self.span, prewhiten_returns=False)
        self.assertEqual(START + 19, report.series["00001"].r2_values.start)

    def test_no_measurable_msa(self):
        panel = self.panel.subset(["00005"])
        with self.assertLogs(level="WARNING"):
            with self.assertRaises(DataError):
                integration_report(panel, self.factors, self.span)

    def test_california_detail(self):
        with self.assertLogs(level="WARNING"):
            report = integration_report(self.panel, self.factors, self.span)
        records, summaries = california_detail(report)
        self.assertEqual(["00001", "00002"], [r.msa_id for r in records])
        self.assertEqual(set(CHARACTERISTICS), set(summaries))
        for c in CHARACTERISTICS:
            self.assertEqual([1, 2], sorted(r.ranks["ca_" + c] for r in records))
            self.assertIn(c, records[0].ranks)
        # National records keep their own ranks only.
        self.assertNotIn("ca_final_r2", report.record("00001").ranks)

    def test_california_detail_without_california(self):
        panel = self.panel.subset(["00003", "00004"])
        report = integration_report(panel, self.factors, self.span)
        self.assertEqual(([], {}), california_detail(report))


class AverageTests(TestCase):
    def test_cohorts(self):
        series = {
            "00001": r2_series("00001", "1990Q1", [0.6] * 8),
            "00002": r2_series("00002", "1991Q1", [0.8] * 4),
        }
        with self.assertLogs(level="WARNING"):
            averages = cohort_averages(
                series,
                [QuarterId.parse(q) for q in ("1985Q1", "1990Q1", "1991Q1")],
            )
        self.assertEqual(["cohort_1"], averages.empty)
        self.assertSeriesAlmostEqual(
            Series("cohort_2", QuarterId.parse("1990Q1"), [0.6] * 8),
            averages.series["cohort_2"],
        )
        self.assertSeriesAlmostEqual(
            Series("cohort_3", QuarterId.parse("1991Q1"), [0.7] * 4),
            averages.series["cohort_3"],
        )

    def test_identical_members(self):
        values = [0.2, 0.4, 0.5, 0.3]
        series = {
            k: r2_series(k, "1990Q1", values) for k in ("00001", "00002", "00003")
        }
        averages = cohort_averages(series, [QuarterId.parse("1990Q1")])
        self.assertSeriesAlmostEqual(
            Series("cohort_1", QuarterId.parse("1990Q1"), values),
            averages.series["cohort_1"],
        )

    def test_groups(self):
        metadata = {
            "00001": MsaMeta.from_state("00001", "Los Angeles, CA", "CA"),
            "00002": MsaMeta.from_state("00002", "San Diego, CA", "CA"),
            "00003": MsaMeta.from_state("00003", "Seattle, WA", "WA"),
        }
        series = {
            "00001": r2_series("00001", "1990Q1", [0.6, 0.6]),
            "00002": r2_series("00002", "1990Q1", [0.8, 1.0]),
            "00003": r2_series("00003", "1990Q2", [0.1]),
        }
        with self.assertLogs(level="WARNING"):
            coast = group_averages(
                series, metadata, "coast_flag", groups=["coastal", "inland"]
            )
        self.assertEqual(["inland"], coast.empty)
        self.assertSeriesAlmostEqual(
            Series("coastal", QuarterId.parse("1990Q1"), [0.7, 0.8]),
            coast.series["coastal"],
        )
        national = group_averages(
            series, metadata, "national", start=QuarterId.parse("1990Q2")
        )
        self.assertSeriesAlmostEqual(
            Series("national", QuarterId.parse("1990Q2"), [0.5666666666]),
            national.series["national"],
        )
        divisions = group_averages(series, metadata, "census_division")
        self.assertEqual(["ca", "division_1"], sorted(divisions.series))

    def test_unknown_grouping(self):
        with self.assertRaises(ValueError):
            group_averages({}, {}, "zipcode")
