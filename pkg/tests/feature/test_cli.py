import csv
import json

import pytest


def read_json(path):
    return json.loads(path.read_text())


def read_csv(path):
    with path.open() as handle:
        return list(csv.reader(handle))


class TestCountCommand:
    """Counting tables written as CSV."""

    def test_partition_column(self, runner, cli_app, output_dir):
        result = runner.invoke(cli_app, ["count", "--n-max", "5", "--no-basis"])
        assert result.exit_code == 0, result.output
        rows = read_csv(output_dir / "count.csv")
        assert rows[0] == ["n", "partitions", "single_trace_2"]
        assert [int(r[1]) for r in rows[1:]] == [1, 1, 2, 3, 5, 7]

    def test_manifest_written(self, runner, cli_app, output_dir):
        result = runner.invoke(cli_app, ["count", "--n-max", "2", "--no-basis"])
        assert result.exit_code == 0, result.output
        manifest = read_json(output_dir / "manifest.json")
        assert manifest["command"] == "count"
        assert manifest["exit_code"] == 0
        assert manifest["artifacts"] == ["count.csv"]
        assert manifest["config"]["n_max"] == 2

    def test_output_dir_flag(self, runner, cli_app, tmp_path):
        target = tmp_path / "elsewhere"
        result = runner.invoke(
            cli_app, ["count", "--n-max", "1", "--no-basis", "--output-dir", str(target)]
        )
        assert result.exit_code == 0, result.output
        assert (target / "count.csv").exists()


class TestConfigErrors:
    """Invalid configs exit with status 2 before any work."""

    def test_missing_required_flag(self, runner, cli_app, output_dir):
        result = runner.invoke(cli_app, ["count"])
        assert result.exit_code == 2
        assert not (output_dir / "manifest.json").exists()

    def test_malformed_config_file(self, runner, cli_app, output_dir, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        result = runner.invoke(cli_app, ["count", "--config", str(path)])
        assert result.exit_code == 2

    def test_config_file(self, runner, cli_app, output_dir, tmp_path):
        path = tmp_path / "count.json"
        path.write_text(json.dumps({"n_max": 3, "basis": False}))
        result = runner.invoke(cli_app, ["count", "--config", str(path)])
        assert result.exit_code == 0, result.output
        assert len(read_csv(output_dir / "count.csv")) == 5

    def test_case_not_for_model(self, runner, cli_app, output_dir):
        result = runner.invoke(
            cli_app, ["akl", "--model", "A", "--case", "case3-singlet", "--cutoff", "1"]
        )
        assert result.exit_code == 2


class TestVevCommand:
    def test_exact_and_oracle_values(self, runner, cli_app, output_dir):
        result = runner.invoke(
            cli_app,
            ["vev", "-p", "Tr(a a)", "-p", "Tr(a+ a+)", "--n", "2", "--oracle"],
        )
        assert result.exit_code == 0, result.output
        report = read_json(output_dir / "vev.json")
        assert report["values"] == {"2": "8"}
        assert report["oracle"] == {"2": "8"}
        assert report["oracle_agrees"] is True
        assert (output_dir / "vev.csv").exists()


class TestHagedornCommand:
    def test_divergent_sum_warns(self, runner, cli_app, output_dir):
        result = runner.invoke(
            cli_app, ["hagedorn", "--degeneracy", "2^n", "--omega", "1", "--T", "2"]
        )
        assert result.exit_code == 0, result.output
        report = read_json(output_dir / "hagedorn.json")
        assert report["divergent"] is True
        assert report["critical_temperature"] == pytest.approx(1.4426950408889634)
        manifest = read_json(output_dir / "manifest.json")
        assert any("Hagedorn tail" in w for w in manifest["warnings"])

    def test_convergent_sum(self, runner, cli_app, output_dir):
        result = runner.invoke(
            cli_app, ["hagedorn", "--degeneracy", "2^n", "--omega", "1", "--T", "1"]
        )
        assert result.exit_code == 0, result.output
        assert read_json(output_dir / "hagedorn.json")["divergent"] is False


class TestCasimirCommand:
    def test_default_penalty(self, runner, cli_app, output_dir):
        result = runner.invoke(cli_app, ["casimir", "--n", "100", "--T", "0.5"])
        assert result.exit_code == 0, result.output
        report = read_json(output_dir / "casimir.json")
        assert report["penalty"] == pytest.approx(2 * 0.5 * 4.605170185988092)
        assert report["nonsinglet_multiplier"] == pytest.approx(1.0)

    def test_too_hot_exits_with_precondition_code(self, runner, cli_app, output_dir):
        result = runner.invoke(
            cli_app, ["casimir", "--n", "100", "--T", "1", "--J", "1"]
        )
        assert result.exit_code != 0
        manifest = read_json(output_dir / "manifest.json")
        assert manifest["exit_code"] == result.exit_code
