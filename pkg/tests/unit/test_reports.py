"""Tests for reports.py - deterministic JSON, CSV and manifests."""

import json
from pathlib import Path

import numpy as np

from src.core.reports import (
    MANIFEST_NAME,
    dumps,
    sha256_of_file,
    write_csv,
    write_json,
    write_manifest,
)


class TestJson:
    """Tests for JSON output."""

    def test_sorted_keys(self):
        assert dumps({"b": 1, "a": 2}).index('"a"') < dumps({"b": 1, "a": 2}).index('"b"')

    def test_numpy_and_complex_values(self):
        data = json.loads(
            dumps(
                {
                    "array": np.array([1, 2]),
                    "flag": np.bool_(True),
                    "value": np.float64(0.1),
                    "z": 1 - 2j,
                    "path": Path("a") / "b",
                }
            )
        )
        assert data == {
            "array": [1, 2],
            "flag": True,
            "path": "a/b",
            "value": 0.1,
            "z": [1.0, -2.0],
        }

    def test_write_creates_parents(self, tmp_path):
        path = write_json(tmp_path / "deep" / "report.json", {"x": 1})
        assert path.read_text().endswith("\n")
        assert json.loads(path.read_text()) == {"x": 1}


class TestCsv:
    """Tests for CSV output."""

    def test_floats_keep_repr(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["n", "value", "pair"], [(1, 0.1 + 0.2, (0.5, 2.0))])
        lines = path.read_text().splitlines()
        assert lines[0] == "n,value,pair"
        assert lines[1] == f"1,{repr(0.1 + 0.2)},0.5 2.0"


class TestManifest:
    """Tests for the SHA-256 manifest."""

    def test_lists_files_sorted(self, tmp_path):
        second = write_json(tmp_path / "b.json", {"x": 2})
        first = write_json(tmp_path / "sub" / "a.json", {"x": 1})
        manifest = json.loads(write_manifest(tmp_path, [second, first], "pack").read_text())
        assert manifest["command"] == "pack"
        assert [entry["file"] for entry in manifest["files"]] == ["b.json", "sub/a.json"]
        assert manifest["files"][0]["sha256"] == sha256_of_file(second)
        assert manifest["files"][0]["bytes"] == second.stat().st_size
        assert (tmp_path / MANIFEST_NAME).exists()

    def test_identical_content_identical_hash(self, tmp_path):
        a = write_json(tmp_path / "a.json", {"x": [0.1, 0.2]})
        b = write_json(tmp_path / "b.json", {"x": [0.1, 0.2]})
        assert sha256_of_file(a) == sha256_of_file(b)
