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

"""Writing result files and the manifest that describes them."""

__all__ = [
    "MANIFEST_NAME",
    "FLOAT_FORMAT",
    "render_csv",
    "write_output_file",
    "read_output_frame",
    "OutputSession",
    "verify_manifest",
]

import hashlib
import json
import logging
import os
from typing import Any, Dict, List, Optional

import pandas as pd

from .errors import StageError

MANIFEST_NAME = "manifest.json"
FLOAT_FORMAT = "%.10g"
NA_REP = "NA"


def render_csv(frame: pd.DataFrame) -> str:
    """Render a frame as CSV text with fixed float formatting."""
    return frame.to_csv(
        index=False, float_format=FLOAT_FORMAT, na_rep=NA_REP, lineterminator="\n"
    )


def write_output_file(path: str, contents: str) -> bool:
    """Write contents to path unless the file already holds them.

    Returns:
      whether the file was changed
    """
    try:
        with open(path, encoding="utf-8", newline="") as f:
            original = f.read()
    except FileNotFoundError:
        original = None
    if original == contents:
        return False
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(contents)
    return True


def _sha256(contents: str) -> str:
    return hashlib.sha256(contents.encode("utf-8")).hexdigest()


def read_output_frame(
    directory: str, name: str, stage: str, dtype: Optional[Dict[str, Any]] = None
) -> pd.DataFrame:
    """Read a file produced by an earlier stage.

    Identifier columns should be given as str in dtype.

    Raises:
      StageError: the file does not exist
    """
    path = os.path.join(directory, name)
    try:
        return pd.read_csv(
            path, na_values=[NA_REP], keep_default_na=False, dtype=dtype
        )
    except FileNotFoundError:
        raise StageError(stage, path)


class OutputSession:
    """Context object for writing the outputs of one or more stages.

    The manifest of earlier runs in the same directory is merged, so that
    stages run one at a time describe the same files as a full run. On
    exit the manifest is written even when a stage failed; the failed
    stage is marked in it.
    """

    changed_files: List[str]

    def __init__(self, directory: str, config_echo: Optional[Dict[str, Any]] = None):
        self.directory = directory
        self.config_echo = config_echo
        self._stage: Optional[str] = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.directory!r})"

    @property
    def manifest_path(self) -> str:
        return os.path.join(self.directory, MANIFEST_NAME)

    def __enter__(self):
        os.makedirs(self.directory, exist_ok=True)
        try:
            with open(self.manifest_path, encoding="utf-8") as f:
                self._manifest = json.load(f)
        except FileNotFoundError:
            self._manifest = {}
        except json.JSONDecodeError:
            logging.warning("Ignoring unreadable %s", self.manifest_path)
            self._manifest = {}
        self._manifest.setdefault("files", {})
        self._manifest.setdefault("stages", {})
        if self.config_echo is not None:
            self._manifest["config"] = self.config_echo
        self.changed_files = []
        return self

    def begin_stage(self, stage: str) -> None:
        """Start a stage, dropping what an earlier run of it recorded."""
        self._stage = stage
        files = self._manifest["files"]
        for name in [n for n, e in files.items() if e["stage"] == stage]:
            del files[name]
        self._manifest["stages"][stage] = "running"

    def end_stage(self) -> None:
        if self._stage is not None:
            self._manifest["stages"][self._stage] = "ok"
            self._stage = None

    def write_frame(self, name: str, frame: pd.DataFrame) -> str:
        """Write a CSV and record it under the current stage."""
        return self.write_text(name, render_csv(frame), len(frame))

    def write_text(self, name: str, contents: str, rows: int) -> str:
        if self._stage is None:
            raise ValueError("no stage in progress")
        path = os.path.join(self.directory, name)
        if write_output_file(path, contents):
            self.changed_files.append(path)
        self._manifest["files"][name] = {
            "rows": rows,
            "sha256": _sha256(contents),
            "stage": self._stage,
        }
        logging.debug("Wrote %s (%d rows)", name, rows)
        return path

    def manifest(self) -> Dict[str, Any]:
        return self._manifest

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is not None and self._stage is not None:
            self._manifest["stages"][self._stage] = f"failed: {exc_val}"
            self._stage = None
        contents = json.dumps(self._manifest, indent=2, sort_keys=True) + "\n"
        write_output_file(self.manifest_path, contents)
        return False


def verify_manifest(directory: str) -> List[str]:
    """Names of manifest entries whose file is missing or has another hash."""
    with open(os.path.join(directory, MANIFEST_NAME), encoding="utf-8") as f:
        manifest = json.load(f)
    mismatched = []
    for name, entry in sorted(manifest.get("files", {}).items()):
        try:
            with open(os.path.join(directory, name), encoding="utf-8", newline="") as f:
                contents = f.read()
        except FileNotFoundError:
            mismatched.append(name)
            continue
        if _sha256(contents) != entry["sha256"]:
            mismatched.append(name)
    return mismatched
