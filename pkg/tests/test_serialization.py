"""Tests for JSON serialization, reports and run logs."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import numpy as np
import pytest

from sdtd.models.configs import StreamKind, Tvl1Params
from sdtd.models.exceptions import DataError, FormatError
from sdtd.models.pipeline import PipelineConfig
from sdtd.serialization import (
    EnhancedJSONEncoder,
    build_run_log,
    load_json,
    save_json,
    strip_volatile,
    to_json,
)


@dataclass
class Record:
    name: str
    values: np.ndarray
    tags: List[str] = field(default_factory=list)


class TestEnhancedJSONEncoder:
    """Test cases for EnhancedJSONEncoder."""

    def test_pydantic_model_uses_aliases(self):
        """Test that models are written by field alias."""
        data = json.loads(json.dumps(Tvl1Params(), cls=EnhancedJSONEncoder))
        assert data["lambda"] == 0.15
        assert "lam" not in data

    def test_numpy_values(self):
        """Test arrays and numpy scalars."""
        data = json.loads(
            json.dumps(
                {"a": np.arange(3), "b": np.float32(0.5), "c": np.int64(4), "d": np.bool_(True)},
                cls=EnhancedJSONEncoder,
            )
        )
        assert data == {"a": [0, 1, 2], "b": 0.5, "c": 4, "d": True}

    def test_enum_path_and_dataclass(self):
        """Test enums, paths and dataclasses."""
        record = Record("clip", np.array([1.0, 2.0]), ["x"])
        data = json.loads(
            json.dumps({"kind": StreamKind.SDTD, "path": Path("a/b"), "rec": record}, cls=EnhancedJSONEncoder)
        )
        assert data["kind"] == "sdtd"
        assert data["path"] == "a/b"
        assert data["rec"] == {"name": "clip", "values": [1.0, 2.0], "tags": ["x"]}

    def test_enum_keys_use_values(self):
        """Test that enum dictionary keys are written as their value."""
        data = json.loads(to_json({StreamKind.TEMPORAL: 1}))
        assert data == {"temporal": 1}

    def test_nonfinite_written_as_null(self):
        """Test that NaN and infinity become null so output is strict JSON."""
        text = to_json({"a": float("nan"), "b": [1.0, float("inf")], "c": np.array([np.nan])})
        assert json.loads(text) == {"a": None, "b": [1.0, None], "c": [None]}
        assert "NaN" not in text


class TestJsonFiles:
    """Test save_json and load_json."""

    def test_round_trip(self, tmp_path):
        """Test writing and reading a document."""
        path = save_json({"b": 1, "a": [1, 2]}, tmp_path / "deep" / "doc.json")
        assert load_json(path) == {"a": [1, 2], "b": 1}

    def test_sorted_keys(self, tmp_path):
        """Test that equal inputs give identical text."""
        first = save_json({"b": 1, "a": 2}, tmp_path / "1.json").read_text()
        second = save_json({"a": 2, "b": 1}, tmp_path / "2.json").read_text()
        assert first == second

    def test_missing_file(self, tmp_path):
        """Test that a missing file is a DataError."""
        with pytest.raises(DataError, match="missing file"):
            load_json(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        """Test that malformed JSON is a FormatError naming the file."""
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(FormatError, match="bad.json"):
            load_json(path)


class TestRunLog:
    """Test the run log written by every command."""

    def test_fields(self):
        """Test that the log carries config echo, hash, seed and paths."""
        config = PipelineConfig(seed=3)
        log = build_run_log("flow", config, inputs=["in"], outputs=[Path("out/a.flo")], metrics={"pairs": 1})
        assert log["command"] == "flow"
        assert log["config"] == config.to_key_values()
        assert log["config_hash"] == config.config_hash()
        assert log["seed"] == 3
        assert log["outputs"] == ["out/a.flo"]
        assert log["exit_code"] == 0
        assert "timestamp" in log

    def test_config_echo_reproduces(self):
        """Test that the logged config reproduces the run."""
        config = PipelineConfig().apply_overrides({"flow.tvl1.warps": 2})
        log = build_run_log("flow", config)
        assert PipelineConfig.from_key_values(log["config"]) == config

    def test_identical_runs_identical_logs(self):
        """Test that two logs differ only in volatile keys."""
        config = PipelineConfig()
        a = build_run_log("eval", config, metrics={"accuracy": 0.5, "elapsed_seconds": 1.0})
        b = build_run_log("eval", config, metrics={"accuracy": 0.5, "elapsed_seconds": 2.0})
        assert strip_volatile(a) == strip_volatile(b)
        assert "timestamp" not in strip_volatile(a)
