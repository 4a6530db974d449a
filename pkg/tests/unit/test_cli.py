"""Tests for the covering-inner CLI commands."""

import json

from typer.testing import CliRunner

from src.cli.commands import app
from src.core.errors import StagnationError
from src.core.metric_packing import ShellHistogram

runner = CliRunner()


def read_json(path):
    return json.loads(path.read_text())


class TestVerifyIntegrals:
    """Tests for verify-integrals."""

    def test_writes_report_and_manifest(self, tmp_path):
        result = runner.invoke(
            app,
            [
                "verify-integrals",
                "--seed",
                "3",
                "--q",
                "2",
                "--sample-count",
                "4000",
                "--monomial-degree",
                "2",
                "--sigma-threshold",
                "5",
                "-o",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 0, result.output
        report = read_json(tmp_path / "verify_integrals" / "integral_report.json")
        assert report["passed"]
        assert report["q"] == 2
        manifest = read_json(tmp_path / "verify_integrals" / "manifest.json")
        assert [entry["file"] for entry in manifest["files"]] == ["integral_report.json"]

    def test_invalid_q_exits_with_config_error(self, tmp_path):
        result = runner.invoke(
            app, ["verify-integrals", "--seed", "1", "--q", "0", "-o", str(tmp_path)]
        )
        assert result.exit_code == 1
        assert "q" in result.output
        assert not (tmp_path / "verify_integrals").exists()

    def test_seed_is_required(self):
        result = runner.invoke(app, ["verify-integrals"])
        assert result.exit_code != 0

    def test_config_file_and_flags(self, tmp_path):
        """Test that a flag overrides the value from the run document."""
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps({"q": 3, "sample_count": 10, "monomial_degree": 0}))
        result = runner.invoke(
            app,
            ["verify-integrals", "-s", "4", "-c", str(config_path), "--q", "1"]
            + ["-o", str(tmp_path)],
        )
        report = read_json(tmp_path / "verify_integrals" / "integral_report.json")
        assert report["q"] == 1
        assert report["sample_count"] == 10
        assert result.exit_code in (0, 2)

    def test_reruns_are_byte_identical(self, tmp_path):
        arguments = ["verify-integrals", "-s", "9", "--sample-count", "300"]
        arguments += ["--monomial-degree", "1"]
        runner.invoke(app, arguments + ["-o", str(tmp_path / "a")])
        runner.invoke(app, arguments + ["-o", str(tmp_path / "b")])
        first = (tmp_path / "a" / "verify_integrals" / "integral_report.json").read_bytes()
        second = (tmp_path / "b" / "verify_integrals" / "integral_report.json").read_bytes()
        assert first == second


class TestPackAndSearch:
    """Tests for pack and rw-search."""

    def test_pack(self, tmp_path):
        result = runner.invoke(
            app,
            [
                "pack",
                "--seed",
                "5",
                "--k",
                "8",
                "--candidate-count",
                "800",
                "--sample-count",
                "1500",
                "-o",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 0, result.output
        report = read_json(tmp_path / "pack" / "packing.json")
        assert report["lower_bound"]["holds"]
        assert report["separation"]["holds"]
        assert report["cover"]["covered"]
        assert report["packing"]["K"] == len(report["packing"]["centers"])
        assert report["shells"]["holds"]
        assert report["shells"]["violations"] == 0
        for section in ("cover", "doubling", "kernel_decay", "lower_bound", "separation"):
            assert report[section]["anchor"]
        assert "(m+2)^2" in report["shells"]["anchor"]

    def test_pack_fails_on_shell_violation(self, tmp_path, mocker):
        """Test that a shell count above (m + 2)^2 gives exit code 2 after the report."""
        mocker.patch(
            "src.core.metric_packing.shell_histogram",
            return_value=ShellHistogram(counts=(5, 3), radius=8**-0.5),
        )
        result = runner.invoke(
            app,
            ["pack", "--seed", "5", "--k", "8", "--candidate-count", "800"]
            + ["--sample-count", "1500", "-o", str(tmp_path)],
        )
        assert result.exit_code == 2
        report = read_json(tmp_path / "pack" / "packing.json")
        assert not report["shells"]["holds"]
        assert report["shells"]["violations"] == 100

    def test_rw_search(self, tmp_path):
        result = runner.invoke(
            app,
            [
                "rw-search",
                "--seed",
                "5",
                "--k",
                "8",
                "--candidate-count",
                "600",
                "--probe-count",
                "500",
                "--sample-count",
                "800",
                "--sign-trials",
                "32",
                "--rotation-trials",
                "2",
                "-o",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 0, result.output
        data = read_json(tmp_path / "rw_search" / "rw_certificate.json")
        assert data["certificate"]["k"] == 8
        assert data["certificate"]["meets_mean_floor"]
        assert "rotation" in data["adapted"]


class TestBuildInner:
    """Tests for build-inner."""

    def test_single_step(self, tmp_path):
        result = runner.invoke(
            app,
            [
                "build-inner",
                "--seed",
                "7",
                "--sample-count",
                "1500",
                "--probe-count",
                "400",
                "--candidate-count",
                "800",
                "--sign-trials",
                "8",
                "--rotation-trials",
                "2",
                "--budget",
                "1",
                "-o",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 0, result.output
        report = read_json(tmp_path / "build_inner" / "series_report.json")
        assert report["exit_code"] == 0
        assert len(report["steps"]) == 1
        assert (tmp_path / "build_inner" / "series_steps.csv").exists()

    def test_exit_code_from_graph(self, tmp_path, mocker):
        """Test that the graph's exit code becomes the process exit code."""
        graph = mocker.Mock()
        graph.invoke.return_value = {
            "exit_code": 3,
            "error": StagnationError("stalled"),
            "report": {"defect_curve": {"values": [1.0]}, "stop_reason": "error"},
        }
        mocker.patch("src.inner_graph.create_inner_graph", return_value=graph)
        result = runner.invoke(app, ["build-inner", "--seed", "1", "-o", str(tmp_path)])
        assert result.exit_code == 3
        assert "StagnationError" in result.output

    def test_invalid_defect_target(self, tmp_path):
        result = runner.invoke(
            app, ["build-inner", "--seed", "1", "--defect-target", "5", "-o", str(tmp_path)]
        )
        assert result.exit_code == 1


class TestOracleAndVersion:
    """Tests for oracle-1d and version."""

    def test_oracle_default_spec(self, tmp_path):
        result = runner.invoke(app, ["oracle-1d", "-o", str(tmp_path)])
        assert result.exit_code == 0, result.output
        report = read_json(tmp_path / "oracle_1d" / "oracle_report.json")
        assert report["passed"]
        assert len(report["checks"]) == 3
        assert (tmp_path / "oracle_1d" / "manifest.json").exists()

    def test_oracle_invalid_spec(self, tmp_path):
        spec = tmp_path / "oracle.json"
        spec.write_text(json.dumps({"blaschke": {"zeros": [[2.0, 0.0]]}}))
        result = runner.invoke(app, ["oracle-1d", "--spec", str(spec), "-o", str(tmp_path)])
        assert result.exit_code == 1

    def test_version(self):
        result = runner.invoke(app, ["version"])
        assert result.exit_code == 0
        assert "covering-inner" in result.output
