"""Fixtures for stream tests."""

import pytest

from sdtd.models.pipeline import PipelineConfig


@pytest.fixture
def small_config():
    """Tiny geometry, clips and network for fast stream tests."""
    return PipelineConfig().apply_overrides(
        {
            "preprocess.resize_to": [10, 10],
            "preprocess.crop": [8, 8],
            "clip.steps": 3,
            "clip.stride": 1,
            "training.test_clips": 2,
            "architecture.layers": "conv3x3x2,relu,pool,fc4,relu",
            "architecture.lstm_hidden": 4,
            "training.precision": "float64",
        }
    )
