"""Tests for the config module."""

from pathlib import Path

import pytest
import yaml

from cxr_preproc.config import Experiment
from cxr_preproc.config import PipelineConfig
from cxr_preproc.config import Settings
from cxr_preproc.config import config_hash
from cxr_preproc.config import load_pipeline_config
from cxr_preproc.config import parse_pipeline_config
from cxr_preproc.dataset import Variant
from cxr_preproc.errors import ConfigurationError
from cxr_preproc.errors import ExitCode

EXAMPLE_CONFIG = Path(__file__).resolve().parents[1] / "config" / "pipeline.example.yaml"


def _raw(tmp_path: Path, **overrides) -> dict:
    raw = {
        "version": 1,
        "paths": {
            "image_dir": str(tmp_path / "images"),
            "label_file": str(tmp_path / "labels.csv"),
            "cache_dir": str(tmp_path / "cache"),
            "output_dir": str(tmp_path / "runs"),
        },
    }
    raw.update(overrides)
    return raw


class TestSettings:
    """Test environment settings."""

    def test_defaults(self):
        """Test default values without environment overrides."""
        runtime = Settings(_env_file=None)
        assert runtime.log_format == "text"
        assert runtime.workers == 1

    def test_environment_prefix(self, monkeypatch):
        """Test CXR_PREPROC_ variables are read."""
        monkeypatch.setenv("CXR_PREPROC_LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("CXR_PREPROC_CACHE_DIR", "/tmp/elsewhere")
        runtime = Settings(_env_file=None)
        assert runtime.log_level == "DEBUG"
        assert runtime.cache_dir == Path("/tmp/elsewhere")


class TestPipelineConfig:
    """Test pipeline configuration parsing and validation."""

    @pytest.fixture
    def runtime(self):
        """Settings without a cache override."""
        return Settings(_env_file=None, cache_dir=None)

    def test_example_file(self, runtime):
        """Test the bundled example parses with all six experiments."""
        config = load_pipeline_config(EXAMPLE_CONFIG, runtime)
        assert config.experiments == tuple(Experiment)
        assert config.model.input_size == config.augment.crop_size == 56
        assert config.splits.n_resamples == 5
        assert config.splits.train_frac == 0.7

    def test_defaults_fill_missing_sections(self, tmp_path, runtime):
        """Test a config with only paths uses the defaults."""
        config = parse_pipeline_config(_raw(tmp_path), runtime)
        assert config.train.lr == 0.005
        assert config.en_normal_members == 4

    def test_unknown_key(self, tmp_path, runtime):
        """Test typos are configuration errors."""
        with pytest.raises(ConfigurationError):
            parse_pipeline_config(_raw(tmp_path, trian={"lr": 0.1}), runtime)
        with pytest.raises(ConfigurationError):
            parse_pipeline_config(_raw(tmp_path, train={"learning_rate": 0.1}), runtime)

    def test_version(self, tmp_path, runtime):
        """Test unknown versions are rejected."""
        with pytest.raises(ConfigurationError, match="version"):
            parse_pipeline_config(_raw(tmp_path, version=2), runtime)

    def test_en_preprocessed_needs_single_variants(self, tmp_path, runtime):
        """Test the ensemble dependency rule."""
        with pytest.raises(ConfigurationError, match="en_preprocessed"):
            parse_pipeline_config(_raw(tmp_path, experiments=["normal", "en_preprocessed"]), runtime)

    def test_unknown_experiment(self, tmp_path, runtime):
        """Test names outside the closed set."""
        with pytest.raises(ConfigurationError):
            parse_pipeline_config(_raw(tmp_path, experiments=["normal", "sharpened"]), runtime)

    def test_size_consistency(self, tmp_path, runtime):
        """Test the model input must match the crops."""
        with pytest.raises(ConfigurationError):
            parse_pipeline_config(_raw(tmp_path, augment={"crop_size": 48, "train_size": 48}), runtime)
        with pytest.raises(ConfigurationError):
            parse_pipeline_config(
                _raw(tmp_path, augment={"test_size": 40}), runtime
            )

    def test_configuration_error_exit_code(self):
        """Test configuration errors map to exit code 1."""
        assert ConfigurationError("x").exit_code == ExitCode.CONFIGURATION == 1

    def test_cache_override(self, tmp_path):
        """Test the environment cache root replaces the file's value."""
        runtime = Settings(_env_file=None, cache_dir=tmp_path / "override")
        config = parse_pipeline_config(_raw(tmp_path), runtime)
        assert config.paths.cache_dir == tmp_path / "override"

    def test_required_variants(self, tmp_path, runtime):
        """Test variants needed by the selected experiments."""
        only_normal = parse_pipeline_config(_raw(tmp_path, experiments=["normal", "en_normal"]), runtime)
        assert only_normal.required_variants() == [Variant.NORMAL]
        lung = parse_pipeline_config(_raw(tmp_path, experiments=["lung"]), runtime)
        assert lung.required_variants() == [Variant.LUNG_CROPPED]
        everything = parse_pipeline_config(_raw(tmp_path), runtime)
        assert everything.required_variants() == list(Variant)

    def test_experiment_hash(self, tmp_path, runtime):
        """Test the hash ignores paths but tracks hyperparameters."""
        base = parse_pipeline_config(_raw(tmp_path), runtime)
        moved = parse_pipeline_config(_raw(tmp_path / "elsewhere"), runtime)
        changed = parse_pipeline_config(_raw(tmp_path, train={"lr": 0.01}), runtime)
        assert base.experiment_hash() == moved.experiment_hash()
        assert base.experiment_hash() != changed.experiment_hash()
        assert len(base.experiment_hash()) == 64

    def test_experiment_hash_tracks_inputs(self, tmp_path, runtime):
        """Test an input digest is folded into the hash."""
        config = parse_pipeline_config(_raw(tmp_path), runtime)
        assert config.experiment_hash("labels:images") == config.experiment_hash("labels:images")
        assert config.experiment_hash("labels:images") != config.experiment_hash("labels:other")
        assert config.experiment_hash("labels:images") != config.experiment_hash()

    def test_member_cap(self, tmp_path, runtime):
        """Test oversized seed ensembles are rejected."""
        with pytest.raises(ConfigurationError):
            parse_pipeline_config(_raw(tmp_path, en_normal_members=101), runtime)

    def test_config_hash_is_canonical(self, runtime, tmp_path):
        """Test models and their dumps hash alike, independent of key order."""
        config = parse_pipeline_config(_raw(tmp_path), runtime)
        assert config_hash(config.train) == config_hash(config.train.model_dump(mode="json"))
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})

    def test_yaml_roundtrip(self, tmp_path, runtime):
        """Test the resolved config re-parses to an equal config."""
        config = parse_pipeline_config(_raw(tmp_path), runtime)
        again = parse_pipeline_config(yaml.safe_load(config.to_yaml()), runtime)
        assert again == config

    def test_validate_paths(self, tmp_path, runtime):
        """Test missing inputs are reported."""
        config = parse_pipeline_config(_raw(tmp_path), runtime)
        with pytest.raises(ConfigurationError, match="Image directory"):
            config.validate_paths()
        (tmp_path / "images").mkdir()
        with pytest.raises(ConfigurationError, match="Label file"):
            config.validate_paths()
        (tmp_path / "labels.csv").write_text("id\n")
        config.validate_paths()

    def test_bad_file(self, tmp_path, runtime):
        """Test unreadable and non-mapping files."""
        with pytest.raises(ConfigurationError):
            load_pipeline_config(tmp_path / "missing.yaml", runtime)
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigurationError):
            load_pipeline_config(path, runtime)

    def test_pipeline_config_is_frozen(self, tmp_path, runtime):
        """Test configs cannot be mutated after validation."""
        config = parse_pipeline_config(_raw(tmp_path), runtime)
        assert isinstance(config, PipelineConfig)
        with pytest.raises(ValueError):
            config.en_normal_members = 2
