import json
from datetime import datetime

import pytest
from pydantic import ValidationError

from app.exceptions import ConfigurationError
from app.schemas import (
    AklConfig,
    CasimirConfig,
    CountConfig,
    EvolveConfig,
    GramConfig,
    HagedornConfig,
    RunManifest,
    ScalingConfig,
    SpinAklConfig,
    TimeGrid,
    VevConfig,
    load_run_config,
)


class TestTimeGrid:
    def test_times_are_uniform(self):
        """Test the grid starts at zero and ends at t_max."""
        grid = TimeGrid(t_max=2.0, points=5)
        assert grid.times() == [0.0, 0.5, 1.0, 1.5, 2.0]

    def test_needs_two_points(self):
        """Test a single-point grid is rejected."""
        with pytest.raises(ValidationError):
            TimeGrid(t_max=1.0, points=1)

    def test_positive_end(self):
        """Test t_max must be positive."""
        with pytest.raises(ValidationError):
            TimeGrid(t_max=0.0)


class TestVevConfig:
    def test_valid_config(self):
        """Test a minimal vev config."""
        config = VevConfig(product=["Tr(a)", "Tr(a+)"], n_values=[2, 3])
        assert config.oracle is False
        assert config.oracle_cutoff == 2
        assert config.seed == 0

    def test_empty_product_rejected(self):
        """Test the product needs at least one monomial."""
        with pytest.raises(ValidationError):
            VevConfig(product=[])

    def test_n_values_positive(self):
        """Test N values below one are rejected."""
        with pytest.raises(ValidationError) as exc_info:
            VevConfig(product=["Tr(a)"], n_values=[0])
        assert "N values must be >= 1" in str(exc_info.value)

    def test_extra_fields_forbidden(self):
        """Test unknown keys are rejected."""
        with pytest.raises(ValidationError):
            VevConfig(product=["Tr(a)"], colour="red")


class TestModelAndCase:
    def test_model_c_needs_length(self):
        """Test Model C without L is rejected."""
        with pytest.raises(ValidationError) as exc_info:
            GramConfig(model="C")
        assert "L >= 2" in str(exc_info.value)

    def test_model_c_with_length(self):
        """Test Model C with L is accepted."""
        assert GramConfig(model="C", length=3).length == 3

    def test_unknown_model(self):
        """Test model tags outside A, B, C are rejected."""
        with pytest.raises(ValidationError):
            GramConfig(model="D")

    def test_case_checked_against_model(self):
        """Test a case that does not belong to the model is rejected."""
        with pytest.raises(ValidationError) as exc_info:
            AklConfig(model="A", case="case3-singlet", cutoff=2)
        assert "does not apply" in str(exc_info.value)

    def test_valid_akl_config(self):
        """Test an akl config without a decay prediction."""
        config = AklConfig(model="B", case="case2", cutoff=3)
        assert config.coupling_base == 0.5
        assert config.time_grid is None

    def test_partial_prediction_rejected(self):
        """Test n, beta and time_grid must come together."""
        with pytest.raises(ValidationError) as exc_info:
            AklConfig(model="B", case="case1", cutoff=2, n=10)
        assert "together" in str(exc_info.value)

    def test_negative_cutoff(self):
        """Test the error cutoff must be non-negative."""
        with pytest.raises(ValidationError):
            AklConfig(model="A", case="case1", cutoff=-1)


class TestEvolveAndScaling:
    def test_evolve_config(self):
        """Test the nested time grid is parsed."""
        config = EvolveConfig(
            model="B", case="case1", cutoff=1, n=10, beta=1.0, time_grid={"t_max": 4.0}
        )
        assert config.time_grid.points == 101
        assert config.penalty is None

    def test_scaling_ns_sorted(self):
        """Test ns are returned in increasing order."""
        config = ScalingConfig(
            model="A", case="case1", cutoff=1, ns=[8, 4, 6], beta=1.0,
            time_grid={"t_max": 1.0, "points": 3},
        )
        assert config.ns == [4, 6, 8]

    def test_scaling_needs_three_sizes(self):
        """Test fewer than three sizes are rejected."""
        with pytest.raises(ValidationError):
            ScalingConfig(
                model="A", case="case1", cutoff=1, ns=[4, 6], beta=1.0,
                time_grid={"t_max": 1.0},
            )

    def test_scaling_sizes_distinct(self):
        """Test repeated sizes are rejected."""
        with pytest.raises(ValidationError) as exc_info:
            ScalingConfig(
                model="A", case="case1", cutoff=1, ns=[4, 4, 6], beta=1.0,
                time_grid={"t_max": 1.0},
            )
        assert "distinct" in str(exc_info.value)


class TestOtherConfigs:
    def test_spin_akl_orders_positive(self):
        """Test error orders below one are rejected."""
        with pytest.raises(ValidationError):
            SpinAklConfig(ns=[3], length=2, orders=[0])

    def test_count_defaults(self):
        """Test count enumerates bases by default."""
        assert CountConfig(n_max=4).basis is True

    def test_hagedorn_defaults(self):
        """Test hagedorn defaults."""
        config = HagedornConfig(degeneracy="2^n", temperature=2.0)
        assert config.cutoff == 400
        assert config.q == 0.0

    def test_casimir_needs_rank_two(self):
        """Test N must be at least two."""
        with pytest.raises(ValidationError):
            CasimirConfig(n=1, temperature=0.5)


class TestLoadRunConfig:
    def test_load_valid_file(self, tmp_path):
        """Test a JSON file is validated into the command's config."""
        path = tmp_path / "count.json"
        path.write_text(json.dumps({"n_max": 3}))
        config = load_run_config("count", path)
        assert isinstance(config, CountConfig)
        assert config.n_max == 3

    def test_unknown_command(self, tmp_path):
        """Test an unknown command raises ConfigurationError."""
        with pytest.raises(ConfigurationError):
            load_run_config("teleport", tmp_path / "x.json")

    def test_missing_file(self, tmp_path):
        """Test a missing file raises ConfigurationError."""
        with pytest.raises(ConfigurationError) as exc_info:
            load_run_config("count", tmp_path / "missing.json")
        assert "Cannot read config" in str(exc_info.value)

    def test_malformed_json(self, tmp_path):
        """Test malformed JSON raises ConfigurationError."""
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            load_run_config("count", path)

    def test_invalid_payload(self, tmp_path):
        """Test schema violations surface as ValidationError."""
        path = tmp_path / "count.json"
        path.write_text(json.dumps({"n_max": -1}))
        with pytest.raises(ValidationError):
            load_run_config("count", path)


class TestRunManifest:
    def test_manifest_defaults(self):
        """Test a manifest with no artifacts or warnings."""
        now = datetime(2026, 1, 1)
        manifest = RunManifest(
            command="count",
            config={"n_max": 3},
            version="0.1.0",
            started_at=now,
            finished_at=now,
            elapsed_seconds=0.0,
        )
        assert manifest.artifacts == []
        assert manifest.warnings == []
        assert manifest.exit_code == 0

    def test_negative_elapsed_rejected(self):
        """Test elapsed time cannot be negative."""
        now = datetime(2026, 1, 1)
        with pytest.raises(ValidationError):
            RunManifest(
                command="count", config={}, version="0.1.0",
                started_at=now, finished_at=now, elapsed_seconds=-1.0,
            )
