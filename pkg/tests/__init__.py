#!/usr/bin/python
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

__all__ = [
    "TestCase",
    "TestCaseInTempDir",
    "FIXTURE_CONFIG",
    "make_panel",
]

import os
import tempfile
import unittest

import numpy as np

FIXTURE_CONFIG = os.path.join(
    os.path.dirname(os.path.abspath(__file__)), "data", "fixture.toml"
)


def make_panel(returns, start=None):
    """Return panel from a mapping of MSA name to return values.

    Names are "<City>, <ST>"; ids are assigned in insertion order.
    """
    from metrohpi.panel import MsaMeta, QuarterId, ReturnPanel, Series

    if start is None:
        start = QuarterId.parse("1980Q1")
    series = {}
    metadata = {}
    for i, (name, values) in enumerate(returns.items()):
        msa_id = f"{i + 1:05d}"
        state = name.rsplit(",", 1)[1].strip()
        first = start[i] if isinstance(start, (list, tuple)) else start
        series[msa_id] = Series(msa_id, first, np.asarray(values, dtype=float))
        metadata[msa_id] = MsaMeta.from_state(msa_id, name, state)
    return ReturnPanel(series, metadata)


class TestCase(unittest.TestCase):
    def assertSeriesAlmostEqual(self, expected, actual, places=7):
        self.assertEqual(expected.start, actual.start)
        self.assertEqual(len(expected), len(actual))
        np.testing.assert_array_almost_equal(expected.values, actual.values, places)


class TestCaseInTempDir(TestCase):
    def setUp(self):
        td = tempfile.TemporaryDirectory(prefix="metrohpi")
        self.test_dir = td.name
        self.addCleanup(td.cleanup)
        cwd = os.getcwd()
        self.addCleanup(os.chdir, cwd)
        os.chdir(self.test_dir)

    def build_tree_contents(self, entries):
        for entry in entries:
            if entry[0].endswith("/"):
                os.mkdir(entry[0])
            else:
                with open(entry[0], "w") as f:
                    f.write(entry[1])

    def assertFileEqual(self, expected_content, path, strip_trailing_whitespace=False):
        with open(path) as f:
            content = f.read()
        if strip_trailing_whitespace:
            content = content.rstrip()
            expected_content = expected_content.rstrip()
        self.assertEqual(expected_content, content)

    def read_bytes(self, path):
        with open(path, "rb") as f:
            return f.read()


def test_suite():
    names = [
        "config",
        "contagion",
        "correlations",
        "figures",
        "ingest",
        "integration",
        "jumps",
        "linreg",
        "metrohpi",
        "outputs",
        "panel",
        "pipeline",
        "synth",
    ]
    module_names = [__name__ + ".test_" + name for name in names]
    loader = unittest.TestLoader()
    return loader.loadTestsFromNames(module_names)
