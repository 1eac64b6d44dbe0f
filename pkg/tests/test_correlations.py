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

"""Tests for metrohpi.correlations."""

import math

import numpy as np

from metrohpi.correlations import (
    Centering,
    Kind,
    Mode,
    PairCorrelation,
    division_summary,
    jump_corr_all_pairs,
    return_corr_all_pairs,
    stratify,
)
from metrohpi.jumps import JumpSeries
from metrohpi.linreg import correlation_tstat
from metrohpi.panel import QuarterId, Series

from . import TestCase, make_panel

START = QuarterId.parse("1990Q1")


def jump_series(msa_id, lm, start=START):
    lm = np.asarray(lm, dtype=float)
    magnitude = np.nan_to_num(np.abs(lm), nan=0.0)
    return JumpSeries(
        msa_id, Series(msa_id, start, lm), magnitude > 1.65, magnitude > 2.0, 8
    )


def censored_oracle(a, b, mode, gate=2.0):
    """Brute-force censored correlation over the union of jump quarters."""
    xs, ys = [], []
    shift = 1 if mode is Mode.LEAD else 0
    for q in sorted(a):
        if q + shift not in b:
            continue
        x, y = a[q], b[q + shift]
        if math.isnan(x) or math.isnan(y):
            continue
        x = x if abs(x) > gate else 0.0
        y = y if abs(y) > gate else 0.0
        if x == 0.0 and y == 0.0:
            continue
        xs.append(x)
        ys.append(y)
    if len(xs) < 3 or len(set(xs)) == 1 or len(set(ys)) == 1:
        return None, len(xs)
    return float(np.corrcoef(xs, ys)[0, 1]), len(xs)


def pair(r, t, a="00001", b="00002"):
    return PairCorrelation(a, b, Mode.CONTEMPORANEOUS, Kind.RETURN, r, 30, t)


class ReturnCorrelationTests(TestCase):
    def test_pair_counts(self):
        rng = np.random.default_rng(1)
        for m, contemporaneous, lead in [(35, 595, 1225), (384, 73536, 147456)]:
            panel = make_panel(
                {f"City {i}, TX": rng.normal(size=20) for i in range(m)}
            )
            result = return_corr_all_pairs(panel, Mode.CONTEMPORANEOUS)
            self.assertEqual(contemporaneous, len(result.pairs))
            self.assertEqual([], result.skipped)
            result = return_corr_all_pairs(panel, Mode.LEAD)
            self.assertEqual(lead, len(result.pairs))

    def test_contemporaneous_pairs_unordered(self):
        rng = np.random.default_rng(2)
        panel = make_panel({f"City {i}, TX": rng.normal(size=20) for i in range(4)})
        pairs = return_corr_all_pairs(panel, Mode.CONTEMPORANEOUS).pairs
        self.assertTrue(all(p.id_a < p.id_b for p in pairs))
        for p in pairs:
            x = panel[p.id_a].values
            y = panel[p.id_b].values
            self.assertAlmostEqual(np.corrcoef(x, y)[0, 1], p.r)
            self.assertEqual(20, p.n_obs)
            self.assertAlmostEqual(correlation_tstat(p.r, 20), p.t_stat)
            self.assertIs(Kind.RETURN, p.kind)

    def test_identical_series(self):
        values = np.random.default_rng(3).normal(size=12)
        panel = make_panel({"A, TX": values, "B, TX": values})
        (p,) = return_corr_all_pairs(panel, Mode.CONTEMPORANEOUS).pairs
        self.assertAlmostEqual(1.0, p.r)
        self.assertLessEqual(p.r, 1.0)

    def test_overlap_only(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=20)
        b = rng.normal(size=20)
        panel = make_panel({"A, TX": a, "B, TX": b}, start=[START, START + 5])
        (p,) = return_corr_all_pairs(panel, Mode.CONTEMPORANEOUS).pairs
        self.assertEqual(15, p.n_obs)
        self.assertAlmostEqual(np.corrcoef(a[5:], b[:15])[0, 1], p.r)

    def test_lead_self_pair_is_autocorrelation(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=30)
        b = rng.normal(size=30)
        panel = make_panel({"A, TX": a, "B, TX": b})
        pairs = {
            (p.id_a, p.id_b): p for p in return_corr_all_pairs(panel, Mode.LEAD).pairs
        }
        self.assertEqual(4, len(pairs))
        self.assertAlmostEqual(np.corrcoef(a[:-1], a[1:])[0, 1], pairs["00001", "00001"].r)
        self.assertEqual(29, pairs["00001", "00001"].n_obs)
        # a leads b
        self.assertAlmostEqual(np.corrcoef(a[:-1], b[1:])[0, 1], pairs["00001", "00002"].r)
        self.assertAlmostEqual(np.corrcoef(b[:-1], a[1:])[0, 1], pairs["00002", "00001"].r)

    def test_short_overlap_skipped(self):
        rng = np.random.default_rng(6)
        panel = make_panel(
            {"A, TX": rng.normal(size=20), "B, TX": rng.normal(size=20)},
            start=[START, START + 15],
        )
        result = return_corr_all_pairs(panel, Mode.CONTEMPORANEOUS)
        self.assertEqual([], result.pairs)
        self.assertEqual([("00001", "00002", "5 observations")], result.skipped)

    def test_constant_overlap_skipped(self):
        rng = np.random.default_rng(7)
        panel = make_panel({"A, TX": [1.0] * 12, "B, TX": rng.normal(size=12)})
        result = return_corr_all_pairs(panel, Mode.CONTEMPORANEOUS)
        self.assertEqual([("00001", "00002", "zero variance")], result.skipped)


class JumpCorrelationTests(TestCase):
    def test_constructed_example(self):
        series = {
            "00001": jump_series("00001", [3.0, 0.0, 2.5, 0.0, 0.0, -2.2]),
            "00002": jump_series("00002", [2.8, 0.0, 0.0, 0.0, 2.1, -2.4]),
        }
        (p,) = jump_corr_all_pairs(series, Mode.CONTEMPORANEOUS).pairs
        x = [3.0, 2.5, 0.0, -2.2]
        y = [2.8, 0.0, 2.1, -2.4]
        self.assertEqual(4, p.n_obs)
        self.assertAlmostEqual(np.corrcoef(x, y)[0, 1], p.r)
        self.assertIs(Kind.JUMP, p.kind)

    def test_full_centering(self):
        a = [3.0, 0.0, 2.5, 0.0, 0.0, -2.2]
        b = [2.8, 0.0, 0.0, 0.0, 2.1, -2.4]
        series = {"00001": jump_series("00001", a), "00002": jump_series("00002", b)}
        (p,) = jump_corr_all_pairs(
            series, Mode.CONTEMPORANEOUS, centering=Centering.FULL
        ).pairs
        union = [0, 2, 4, 5]
        x = np.array(a)[union] - np.mean(a)
        y = np.array(b)[union] - np.mean(b)
        self.assertAlmostEqual(x @ y / math.sqrt((x @ x) * (y @ y)), p.r)

    def test_below_gate_values_are_censored(self):
        series = {
            "00001": jump_series("00001", [3.0, 1.9, 2.5, -1.0, 0.3, -2.2]),
            "00002": jump_series("00002", [2.8, -0.5, 0.1, 1.2, 2.1, -2.4]),
        }
        (p,) = jump_corr_all_pairs(series, Mode.CONTEMPORANEOUS).pairs
        self.assertAlmostEqual(
            np.corrcoef([3.0, 2.5, 0.0, -2.2], [2.8, 0.0, 2.1, -2.4])[0, 1], p.r
        )

    def test_proportional_jumps(self):
        a = [3.0, 0.0, -2.5, 0.0, 4.0, 0.0]
        series = {
            "00001": jump_series("00001", a),
            "00002": jump_series("00002", [1.5 * v for v in a]),
        }
        (p,) = jump_corr_all_pairs(series, Mode.CONTEMPORANEOUS).pairs
        self.assertAlmostEqual(1.0, p.r)
        self.assertEqual(3, p.n_obs)

    def test_never_jumping_member_excluded(self):
        series = {
            "00001": jump_series("00001", [3.0, 0.0, 2.5, 0.0, -2.2]),
            "00002": jump_series("00002", [0.5, 0.1, -1.0, 0.3, 1.9]),
        }
        result = jump_corr_all_pairs(series, Mode.CONTEMPORANEOUS)
        self.assertEqual([], result.pairs)
        self.assertEqual([("00001", "00002", "zero variance")], result.skipped)

    def test_too_few_jump_quarters(self):
        series = {
            "00001": jump_series("00001", [3.0, 0.0, 0.0, 0.0]),
            "00002": jump_series("00002", [0.0, 2.5, 0.0, 0.0]),
        }
        result = jump_corr_all_pairs(series, Mode.CONTEMPORANEOUS)
        self.assertEqual([("00001", "00002", "2 observations")], result.skipped)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(8)
        series = {}
        for i in range(6):
            msa_id = f"{i + 1:05d}"
            lm = rng.normal(scale=1.6, size=40)
            lm[rng.random(40) < 0.05] = math.nan
            series[msa_id] = jump_series(msa_id, lm, START + int(rng.integers(0, 6)))
        for mode in Mode:
            result = jump_corr_all_pairs(series, mode)
            found = {(p.id_a, p.id_b): p for p in result.pairs}
            skipped = {(a, b) for a, b, _ in result.skipped}
            if mode is Mode.CONTEMPORANEOUS:
                keys = [(a, b) for a in sorted(series) for b in sorted(series) if a < b]
            else:
                keys = [(a, b) for a in sorted(series) for b in sorted(series)]
            self.assertEqual(set(keys), set(found) | skipped)
            for a, b in keys:
                qa = {
                    q.ordinal: v
                    for q, v in zip(series[a].lm_values.quarters(), series[a].lm_values.values)
                }
                qb = {
                    q.ordinal: v
                    for q, v in zip(series[b].lm_values.quarters(), series[b].lm_values.values)
                }
                r, n = censored_oracle(qa, qb, mode)
                if r is None:
                    self.assertIn((a, b), skipped)
                else:
                    self.assertAlmostEqual(r, found[a, b].r)
                    self.assertEqual(n, found[a, b].n_obs)

    def test_lead_pair_count(self):
        rng = np.random.default_rng(9)
        series = {
            f"{i:05d}": jump_series(f"{i:05d}", rng.normal(scale=3.0, size=30))
            for i in range(1, 6)
        }
        result = jump_corr_all_pairs(series, Mode.LEAD)
        self.assertEqual(25, len(result.pairs) + len(result.skipped))


class StratifyTests(TestCase):
    def test_threshold_strata(self):
        pairs = [pair(0.1, 1.9), pair(0.2, 2.5), pair(0.3, 3.5)]
        full, over2, over3 = stratify(pairs)
        self.assertEqual(("all", 3), (full.tag, full.n))
        self.assertAlmostEqual(0.2, full.mean)
        self.assertAlmostEqual(0.1, full.sigma)
        self.assertAlmostEqual(0.2 / (0.1 / math.sqrt(3)), full.mean_t)
        self.assertEqual(("t>2", 2), (over2.tag, over2.n))
        self.assertAlmostEqual(0.25, over2.mean)
        self.assertAlmostEqual(0.3, over2.maximum)
        self.assertAlmostEqual(0.2, over2.minimum)
        self.assertEqual(("t>3", 1), (over3.tag, over3.n))
        self.assertTrue(math.isnan(over3.sigma))
        self.assertTrue(math.isnan(over3.mean_t))

    def test_all_zero_correlations(self):
        full, over2, over3 = stratify([pair(0.0, 0.0)] * 4)
        self.assertEqual(4, full.n)
        self.assertTrue(math.isnan(full.mean_t))
        self.assertFalse(over2.defined)
        self.assertFalse(over3.defined)
        self.assertTrue(math.isnan(over2.mean))

    def test_matches_filter_oracle(self):
        rng = np.random.default_rng(10)
        rs = rng.uniform(-0.5, 0.9, 200)
        pairs = [pair(float(r), float(correlation_tstat(r, 30))) for r in rs]
        rows = stratify(pairs, thresholds=(2.0, 3.0, 5.0))
        self.assertEqual(["all", "t>2", "t>3", "t>5"], [s.tag for s in rows])
        for row, threshold in zip(rows[1:], (2.0, 3.0, 5.0)):
            kept = np.array([p.r for p in pairs if p.t_stat > threshold])
            self.assertEqual(len(kept), row.n)
            self.assertAlmostEqual(kept.mean(), row.mean)
            self.assertAlmostEqual(kept.std(ddof=1), row.sigma)
            self.assertEqual(kept.max(), row.maximum)
            self.assertEqual(kept.min(), row.minimum)
        self.assertEqual(sorted(r.n for r in rows)[::-1], [r.n for r in rows])


class DivisionSummaryTests(TestCase):
    def setUp(self):
        super().setUp()
        rng = np.random.default_rng(11)
        shared = rng.normal(size=24)
        returns = {f"City {i}, WA": rng.normal(size=24) for i in range(20)}
        for name in ("Los Angeles, CA", "San Diego, CA", "Fresno, CA"):
            returns[name] = shared
        self.panel = make_panel(returns)

    def test_contemporaneous(self):
        pairs = return_corr_all_pairs(self.panel, Mode.CONTEMPORANEOUS).pairs
        rows = division_summary(pairs, self.panel.metadata)
        self.assertEqual(["division_1", "ca"], [r.division for r in rows])
        division_1, ca = rows
        self.assertEqual((20, 190), (division_1.n_msas, division_1.n_pairs))
        self.assertEqual((3, 3, 3), (ca.n_msas, ca.n_pairs, ca.n_significant))
        self.assertEqual(100.0, ca.pct_significant)
        self.assertAlmostEqual(1.0, ca.mean_r)

    def test_lead(self):
        pairs = return_corr_all_pairs(self.panel, Mode.LEAD).pairs
        rows = division_summary(pairs, self.panel.metadata)
        self.assertEqual([400, 9], [r.n_pairs for r in rows])

    def test_empty_division(self):
        rows = division_summary([], self.panel.metadata)
        self.assertEqual([0, 0], [r.n_pairs for r in rows])
        self.assertTrue(math.isnan(rows[0].pct_significant))
