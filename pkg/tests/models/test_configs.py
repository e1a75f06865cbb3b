"""Tests for the per-module configuration models."""

import pytest
from pydantic import ValidationError

from sdtd.models.configs import (
    ArchitectureConfig,
    ClipSpec,
    CompensationMode,
    EgomotionConfig,
    FusionConfig,
    MotionClass,
    MotionKind,
    PreprocessSpec,
    SceneSpec,
    StreamKind,
    TrainingConfig,
    TrajectoryConfig,
    TtiConfig,
    TtiMode,
    Tvl1Params,
)


class TestTvl1Params:
    """Test TV-L1 parameter validation."""

    def test_defaults(self):
        """Test the standard parameter set."""
        params = Tvl1Params()
        assert (params.lam, params.theta, params.tau) == (0.15, 0.3, 0.25)
        assert (params.warps, params.pyramid_levels, params.pyramid_scale) == (5, 5, 0.5)

    def test_lambda_alias(self):
        """Test that the config key is ``lambda``."""
        assert Tvl1Params().to_dict()["lambda"] == 0.15
        assert Tvl1Params.from_dict({"lambda": 0.3}).lam == 0.3

    def test_tau_stability_bound(self):
        """Test that tau above 1/4 is rejected."""
        with pytest.raises(ValidationError, match="tau must be <= 0.25"):
            Tvl1Params(tau=0.3)

    def test_scale_interval(self):
        """Test that the pyramid scale lies in (0, 1)."""
        with pytest.raises(ValidationError):
            Tvl1Params(pyramid_scale=1.0)

    def test_counts(self):
        """Test that counts must be at least one."""
        with pytest.raises(ValidationError):
            Tvl1Params(warps=0)

    def test_median_kernel(self):
        """Test the odd median side, with 1 switching the filter off."""
        assert Tvl1Params().median_kernel == 5
        assert Tvl1Params(median_kernel=1).median_kernel == 1
        with pytest.raises(ValidationError, match="odd"):
            Tvl1Params(median_kernel=4)


class TestEgomotionConfig:
    """Test camera-motion settings."""

    def test_mode_from_text(self):
        """Test that a mode string parses in lax mode."""
        config = EgomotionConfig.from_dict({"mode": "warp-recompute"})
        assert config.mode == CompensationMode.WARP_RECOMPUTE

    def test_unknown_mode(self):
        """Test that an unknown mode is rejected."""
        with pytest.raises(ValidationError):
            EgomotionConfig.from_dict({"mode": "rotate"})

    def test_quality_ratio_range(self):
        """Test the open interval bound on quality_ratio."""
        with pytest.raises(ValidationError):
            EgomotionConfig(quality_ratio=0.0)


class TestTrajectoryConfig:
    """Test trajectory settings."""

    def test_defaults(self):
        """Test grid step, length and kernel defaults."""
        config = TrajectoryConfig()
        assert (config.grid_step, config.max_length, config.median_kernel) == (5, 15, 3)

    def test_coverage_radius(self):
        """Test the default exclusion radius is half the grid step."""
        assert TrajectoryConfig(grid_step=6).coverage_radius == 3.0
        assert TrajectoryConfig(min_coverage_dist=1.5).coverage_radius == 1.5

    def test_even_kernel_rejected(self):
        """Test the odd-kernel requirement."""
        with pytest.raises(ValidationError, match="odd"):
            TrajectoryConfig(median_kernel=4)

    def test_step_bounds(self):
        """Test 0 < min_mean_step < max_step."""
        with pytest.raises(ValidationError, match="min_mean_step"):
            TrajectoryConfig(min_mean_step=5.0, max_step=2.0)

    def test_max_length(self):
        """Test that a trajectory needs at least two displacements."""
        with pytest.raises(ValidationError):
            TrajectoryConfig(max_length=1)


class TestTtiConfig:
    """Test texture image settings."""

    def test_threshold_from_ratio(self):
        """Test P = ceil(ratio * H * W)."""
        assert TtiConfig(threshold_ratio=0.25).threshold_for(64, 64) == 1024
        assert TtiConfig(threshold_ratio=0.001).threshold_for(10, 10) == 1

    def test_explicit_threshold(self):
        """Test that an explicit P wins over the ratio."""
        assert TtiConfig(threshold=7).threshold_for(64, 64) == 7

    def test_channels(self):
        """Test channel count per mode."""
        assert TtiConfig().channels == 3
        assert TtiConfig(mode=TtiMode.ONE_CHANNEL).channels == 1

    def test_threshold_positive(self):
        """Test that P must be at least one."""
        with pytest.raises(ValidationError):
            TtiConfig(threshold=0)


class TestClipAndPreprocess:
    """Test clip sampling and crop geometry settings."""

    def test_stride_for(self):
        """Test that texture sequences use their own stride."""
        spec = ClipSpec(stride=5, sdtd_stride=1)
        assert spec.stride_for(StreamKind.SPATIAL) == 5
        assert spec.stride_for(StreamKind.TEMPORAL) == 5
        assert spec.stride_for(StreamKind.SDTD) == 1

    def test_crop_must_fit(self):
        """Test that the crop cannot exceed the resized image."""
        with pytest.raises(ValidationError, match="larger than"):
            PreprocessSpec(resize_to=(50, 50), crop=(56, 56))

    def test_full_size_preset(self):
        """Test the full-size geometry."""
        spec = PreprocessSpec.full_size()
        assert spec.resize_to == (340, 256)
        assert spec.crop == (224, 224)


class TestTrainingConfig:
    """Test training hyperparameters."""

    def test_momentum_bounds(self):
        """Test momentum in [0, 1)."""
        assert TrainingConfig(momentum=0.0).momentum == 0.0
        with pytest.raises(ValidationError):
            TrainingConfig(momentum=1.0)

    def test_learning_rate_positive(self):
        """Test that the learning rate must be positive."""
        with pytest.raises(ValidationError):
            TrainingConfig(learning_rate=0.0)

    def test_lr_steps_from_list(self):
        """Test that a list of milestones parses to a tuple."""
        assert TrainingConfig.from_dict({"lr_steps": [10, 20]}).lr_steps == (10, 20)


class TestFusionAndArchitecture:
    """Test fusion weights and architecture settings."""

    def test_weight_for(self):
        """Test weight lookup by stream."""
        weights = FusionConfig(sdtd=2.0)
        assert weights.weight_for(StreamKind.SDTD) == 2.0
        assert weights.weight_for(StreamKind.SPATIAL) == 1.0

    def test_nonpositive_weight(self):
        """Test that fusion weights must be positive."""
        with pytest.raises(ValidationError):
            FusionConfig(spatial=0.0)

    def test_architecture_defaults(self):
        """Test LSTM width and forget bias defaults."""
        arch = ArchitectureConfig()
        assert arch.lstm_hidden == 128
        assert arch.forget_bias == 1.0


class TestSyntheticSpecs:
    """Test motion class and scene settings."""

    def test_motion_kind(self):
        """Test motion class names."""
        motion = MotionClass(name=MotionKind.ZIGZAG)
        assert motion.name == "zigzag"
        assert motion.period == 8

    def test_duty_range(self):
        """Test the duty cycle bound."""
        with pytest.raises(ValidationError):
            MotionClass(name=MotionKind.STOP_AND_GO, duty=0.0)

    def test_scene_minimum_size(self):
        """Test that tiny frames are rejected."""
        with pytest.raises(ValidationError):
            SceneSpec(height=8)
