"""Tests for PipelineConfig and its key=value text form."""

import pytest

from sdtd.models.configs import CompensationMode, FlowSolverKind
from sdtd.models.exceptions import ConfigError
from sdtd.models.pipeline import (
    DATA_ROOT_ENV,
    PipelineConfig,
    parse_value,
    resolve_data_path,
    split_override,
)


class TestConfigEcho:
    """Test that the echoed configuration reproduces the run."""

    def test_defaults_round_trip(self):
        """Test echo of the defaults parses back to the defaults."""
        config = PipelineConfig()
        assert PipelineConfig.from_key_values(config.to_key_values()) == config

    def test_modified_round_trip(self):
        """Test echo of a modified config parses back exactly."""
        config = PipelineConfig().apply_overrides(
            {"flow.tvl1.warps": 2, "egomotion.mode": "off", "training.lr_steps": [5, 9], "tti.threshold": 40}
        )
        restored = PipelineConfig.from_key_values(config.to_key_values())
        assert restored == config
        assert restored.config_hash() == config.config_hash()

    def test_echo_is_sorted(self):
        """Test that echo lines are sorted by key."""
        lines = PipelineConfig().to_key_values()
        assert lines == sorted(lines)
        assert "flow.tvl1.lambda=0.15" in lines

    def test_hash_changes_with_config(self):
        """Test that a different setting gives a different hash."""
        assert PipelineConfig().config_hash() != PipelineConfig(seed=1).config_hash()


class TestFromKeyValues:
    """Test parsing of config text."""

    def test_comments_and_blank_lines(self):
        """Test that comments and blank lines are skipped."""
        config = PipelineConfig.from_key_values(
            ["# a comment", "", "seed = 7  # trailing", "flow.solver = horn_schunck"]
        )
        assert config.seed == 7
        assert config.flow.solver == FlowSolverKind.HORN_SCHUNCK

    def test_missing_equals(self):
        """Test that a line without '=' names its line number."""
        with pytest.raises(ConfigError, match="line 2"):
            PipelineConfig.from_key_values(["seed=1", "flow.solver"])

    def test_unknown_key(self):
        """Test that an unknown key is reported."""
        with pytest.raises(ConfigError, match="unknown config key: flow.tvl1.warpz"):
            PipelineConfig.from_key_values(["flow.tvl1.warpz=3"])

    def test_invalid_value(self):
        """Test that a failing validator becomes a ConfigError."""
        with pytest.raises(ConfigError, match="invalid configuration"):
            PipelineConfig.from_key_values(["flow.tvl1.tau=0.5"])

    def test_from_file(self, tmp_path):
        """Test loading a config file."""
        path = tmp_path / "run.cfg"
        path.write_text("egomotion.mode = warp-recompute\njobs = 2\n", encoding="utf-8")
        config = PipelineConfig.from_file(path)
        assert config.egomotion.mode == CompensationMode.WARP_RECOMPUTE
        assert config.jobs == 2

    def test_missing_file(self, tmp_path):
        """Test that a missing config file is a ConfigError."""
        with pytest.raises(ConfigError, match="not found"):
            PipelineConfig.from_file(tmp_path / "absent.cfg")

    def test_jobs_positive(self):
        """Test the jobs lower bound."""
        with pytest.raises(ConfigError):
            PipelineConfig().apply_overrides({"jobs": 0})


class TestHelpers:
    """Test value parsing, overrides and data paths."""

    def test_parse_value(self):
        """Test JSON literals with a bare-string fallback."""
        assert parse_value("3") == 3
        assert parse_value("0.5") == 0.5
        assert parse_value("true") is True
        assert parse_value("null") is None
        assert parse_value("[1, 2]") == [1, 2]
        assert parse_value("tvl1") == "tvl1"

    def test_split_override(self):
        """Test splitting a --key=value token."""
        assert split_override("--flow.tvl1.warps=3") == ("flow.tvl1.warps", "3")
        assert split_override("--fusion.sdtd=a=b") == ("fusion.sdtd", "a=b")

    def test_split_override_rejects_flags(self):
        """Test that a token without '=' is unrecognized."""
        with pytest.raises(ConfigError, match="unrecognized argument"):
            split_override("--bogus")

    def test_data_root(self, tmp_path, monkeypatch):
        """Test that relative paths are prefixed with the data root."""
        monkeypatch.setenv(DATA_ROOT_ENV, str(tmp_path))
        assert resolve_data_path("work") == tmp_path / "work"
        assert resolve_data_path(tmp_path / "abs") == tmp_path / "abs"

    def test_no_data_root(self, monkeypatch):
        """Test that paths pass through without the variable."""
        monkeypatch.delenv(DATA_ROOT_ENV, raising=False)
        assert str(resolve_data_path("work")) == "work"
