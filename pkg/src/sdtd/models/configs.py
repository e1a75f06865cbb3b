"""Configuration models for every stage of the sdtd pipeline.

Each stage owns one model. All fields have defaults, so ``Tvl1Params()``
or ``TrajectoryConfig()`` is always a valid configuration; the defaults
follow the conventional settings of the underlying methods where the
research source leaves values unstated.
"""

import math
from enum import Enum
from typing import Optional, Tuple

from pydantic import Field, field_validator, model_validator

from sdtd.models.base import SdtdModel
from sdtd.models.validators import (
    validate_finite_number,
    validate_non_negative,
    validate_odd,
    validate_open_unit_interval,
    validate_positive,
)


class FlowSolverKind(str, Enum):
    """Optical flow solver selection."""

    TVL1 = "tvl1"
    HORN_SCHUNCK = "horn_schunck"


class CompensationMode(str, Enum):
    """How camera motion is removed from the flow fields.

    - OFF: raw flow is used unchanged
    - SUBTRACT: homography-induced displacement is subtracted from the flow
    - WARP_RECOMPUTE: frame t+1 is rectified by the homography and flow is
      solved again
    """

    OFF = "off"
    SUBTRACT = "subtract"
    WARP_RECOMPUTE = "warp-recompute"


class TtiMode(str, Enum):
    """Trajectory Texture image channel layout."""

    ONE_CHANNEL = "one_channel"
    THREE_CHANNEL = "three_channel"


class OverwriteRule(str, Enum):
    """Which written-pixel mask counts overwrites.

    - PRE_WRITE: a point counts when its pixel was already written before it
    - LITERAL: after each frame group, every point of the group whose pixel
      is written in the post-group mask counts
    """

    PRE_WRITE = "pre-write"
    LITERAL = "literal"


class StreamKind(str, Enum):
    """The three recognition streams."""

    SPATIAL = "spatial"
    TEMPORAL = "temporal"
    SDTD = "sdtd"


class Precision(str, Enum):
    """Floating point precision of network tensors."""

    FLOAT32 = "float32"
    FLOAT64 = "float64"


class MotionKind(str, Enum):
    """Long-term motion patterns of the synthetic benchmark."""

    LINEAR = "linear"
    CIRCULAR = "circular"
    ZIGZAG = "zigzag"
    STOP_AND_GO = "stop_and_go"


class Tvl1Params(SdtdModel):
    """Parameters of the TV-L1 duality optical flow solver.

    Attributes:
        lam: Data-term weight (config key ``lambda``)
        theta: Coupling between the data and TV sub-problems
        tau: Dual time step, at most 0.25 for stability
        warps: Outer warps per pyramid level
        inner_iters: Primal-dual iterations per warp
        pyramid_scale: Downsampling factor between levels
        pyramid_levels: Requested number of levels (truncated at 8x8)
        stop_eps: Stop inner iterations once the max update is below this
        median_kernel: Side of the median filter applied to the flow after
            every warp; 1 disables it
    """

    lam: float = Field(default=0.15, alias="lambda")
    theta: float = 0.3
    tau: float = 0.25
    warps: int = 5
    inner_iters: int = 30
    pyramid_scale: float = 0.5
    pyramid_levels: int = 5
    stop_eps: float = 1e-2
    median_kernel: int = 5

    @field_validator("lam", "theta", "tau", "stop_eps")
    @classmethod
    def validate_positive_fields(cls, value: float, info) -> float:
        """Validate strictly positive weights and steps."""
        return validate_positive(value, info.field_name)

    @field_validator("tau")
    @classmethod
    def validate_tau_stability(cls, value: float) -> float:
        """Validate the dual-step stability bound."""
        if value > 0.25:
            raise ValueError(f"tau must be <= 0.25 for dual-step stability, got {value}")
        return value

    @field_validator("warps", "inner_iters", "pyramid_levels")
    @classmethod
    def validate_counts(cls, value: int, info) -> int:
        """Validate iteration and level counts."""
        if value < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {value}")
        return value

    @field_validator("pyramid_scale")
    @classmethod
    def validate_scale(cls, value: float) -> float:
        return validate_open_unit_interval(value, "pyramid_scale")

    @field_validator("median_kernel")
    @classmethod
    def validate_median_kernel(cls, value: int) -> int:
        return validate_odd(value, "median_kernel")


class HornSchunckParams(SdtdModel):
    """Parameters of the Horn-Schunck baseline solver.

    ``alpha`` weights smoothness against brightness constancy, measured on
    8-bit intensity values.
    """

    alpha: float = 10.0
    iters: int = 300

    @field_validator("alpha")
    @classmethod
    def validate_alpha(cls, value: float) -> float:
        return validate_positive(value, "alpha")

    @field_validator("iters")
    @classmethod
    def validate_iters(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"iters must be >= 1, got {value}")
        return value


class FlowConfig(SdtdModel):
    """Solver choice plus the parameters of each solver."""

    solver: FlowSolverKind = FlowSolverKind.TVL1
    tvl1: Tvl1Params = Field(default_factory=Tvl1Params)
    horn_schunck: HornSchunckParams = Field(default_factory=HornSchunckParams)


class EgomotionConfig(SdtdModel):
    """Camera-motion estimation and compensation settings.

    Attributes:
        mode: Compensation strategy
        iters: RANSAC iterations
        inlier_thresh: Symmetric transfer error bound for inliers, pixels
        max_corners: Strongest Harris corners kept per frame
        quality_ratio: Minimum response relative to the strongest corner
        harris_k: Harris trace weight
        harris_sigma: Gaussian window of the structure tensor
        seed: Global RANSAC seed; pair i uses ``seed + i``
    """

    mode: CompensationMode = CompensationMode.SUBTRACT
    iters: int = 500
    inlier_thresh: float = 1.5
    max_corners: int = 400
    quality_ratio: float = 0.01
    harris_k: float = 0.04
    harris_sigma: float = 1.0
    seed: int = 0

    @field_validator("iters", "max_corners")
    @classmethod
    def validate_counts(cls, value: int, info) -> int:
        if value < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {value}")
        return value

    @field_validator("inlier_thresh", "harris_sigma")
    @classmethod
    def validate_positive_fields(cls, value: float, info) -> float:
        return validate_positive(value, info.field_name)

    @field_validator("quality_ratio")
    @classmethod
    def validate_quality(cls, value: float) -> float:
        return validate_open_unit_interval(value, "quality_ratio")


class TrajectoryConfig(SdtdModel):
    """Dense trajectory extraction settings.

    Attributes:
        grid_step: Sampling grid step W in pixels
        max_length: Maximum displacements L per trajectory
        median_kernel: Side of the median filter applied to the flow
        min_mean_step: Trajectories with a smaller mean step are static
        max_step: Any larger step marks a tracking failure
        scales: Number of spatial scales tracked
        scale_factor: Resolution factor between consecutive scales
        min_coverage_dist: Chebyshev exclusion radius for resampling;
            ``None`` means half the grid step
    """

    grid_step: int = 5
    max_length: int = 15
    median_kernel: int = 3
    min_mean_step: float = 0.3
    max_step: float = 20.0
    scales: int = 1
    scale_factor: float = 0.7071
    min_coverage_dist: Optional[float] = None

    @field_validator("grid_step", "scales")
    @classmethod
    def validate_at_least_one(cls, value: int, info) -> int:
        if value < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {value}")
        return value

    @field_validator("max_length")
    @classmethod
    def validate_length(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f"max_length must be >= 2, got {value}")
        return value

    @field_validator("median_kernel")
    @classmethod
    def validate_kernel(cls, value: int) -> int:
        return validate_odd(value, "median_kernel", minimum=3)

    @field_validator("scale_factor")
    @classmethod
    def validate_scale(cls, value: float) -> float:
        return validate_open_unit_interval(value, "scale_factor")

    @field_validator("min_coverage_dist")
    @classmethod
    def validate_coverage(cls, value: Optional[float]) -> Optional[float]:
        if value is not None:
            validate_positive(value, "min_coverage_dist")
        return value

    @model_validator(mode="after")
    def validate_step_bounds(self) -> "TrajectoryConfig":
        """Validate 0 < min_mean_step < max_step."""
        if not 0.0 < self.min_mean_step < self.max_step:
            raise ValueError(
                f"need 0 < min_mean_step < max_step, got {self.min_mean_step} and {self.max_step}"
            )
        return self

    @property
    def coverage_radius(self) -> float:
        """Effective resampling exclusion radius in pixels."""
        if self.min_coverage_dist is None:
            return self.grid_step / 2.0
        return self.min_coverage_dist


class TtiConfig(SdtdModel):
    """Trajectory Texture image sequence settings.

    Attributes:
        threshold_ratio: P as a fraction of the frame area
        threshold: Explicit P, overriding ``threshold_ratio`` when set
        mode: Channel layout
        overwrite_rule: Overwrite counting rule
        bound: Displacement mapped to the ends of the 8-bit range on export
        export_png: Write numbered PNGs next to the raw dump
    """

    threshold_ratio: float = 0.25
    threshold: Optional[int] = None
    mode: TtiMode = TtiMode.THREE_CHANNEL
    overwrite_rule: OverwriteRule = OverwriteRule.PRE_WRITE
    bound: float = 20.0
    export_png: bool = True

    @field_validator("threshold_ratio", "bound")
    @classmethod
    def validate_positive_fields(cls, value: float, info) -> float:
        return validate_positive(value, info.field_name)

    @field_validator("threshold")
    @classmethod
    def validate_threshold(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError(f"threshold must be >= 1, got {value}")
        return value

    def threshold_for(self, height: int, width: int) -> int:
        """Resolve the overwrite threshold P for a frame size."""
        if self.threshold is not None:
            return self.threshold
        return max(1, math.ceil(self.threshold_ratio * height * width))

    @property
    def channels(self) -> int:
        """Number of canvas channels for the configured mode."""
        return 1 if self.mode == TtiMode.ONE_CHANNEL else 3


class ClipSpec(SdtdModel):
    """How many items a clip holds and how far apart they are.

    ``stride`` applies to frames and flows; TTI sequences use
    ``sdtd_stride``.
    """

    steps: int = 16
    stride: int = 5
    sdtd_stride: int = 1

    @field_validator("steps", "stride", "sdtd_stride")
    @classmethod
    def validate_counts(cls, value: int, info) -> int:
        if value < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {value}")
        return value

    def stride_for(self, kind: StreamKind) -> int:
        """Get the item stride used by a stream."""
        return self.sdtd_stride if kind == StreamKind.SDTD else self.stride


class PreprocessSpec(SdtdModel):
    """Resize and crop geometry, as (width, height) pairs.

    The defaults are the desk-scale geometry; :meth:`full_size` gives
    the full-size 340x256 resize with 224x224 crops.
    """

    resize_to: Tuple[int, int] = (85, 64)
    crop: Tuple[int, int] = (56, 56)
    flip: bool = True

    @model_validator(mode="after")
    def validate_crop_fits(self) -> "PreprocessSpec":
        """Validate crop <= resize_to componentwise."""
        for name, value in (("resize_to", self.resize_to), ("crop", self.crop)):
            if min(value) < 1:
                raise ValueError(f"{name} extents must be >= 1, got {value}")
        if self.crop[0] > self.resize_to[0] or self.crop[1] > self.resize_to[1]:
            raise ValueError(f"crop {self.crop} larger than resized image {self.resize_to}")
        return self

    @classmethod
    def full_size(cls) -> "PreprocessSpec":
        """Full-size geometry: resize to 340x256 and crop 224x224."""
        return cls(resize_to=(340, 256), crop=(224, 224))


class ArchitectureConfig(SdtdModel):
    """CNN-RNN topology.

    Attributes:
        layers: Comma-separated CNN layer list. Kinds are ``convKxKxN``
            (stride 1, same padding), ``relu``, ``pool`` (2x2 max) and
            ``fcN``; a flatten is inserted before the first ``fc``.
        lstm_hidden: Hidden units per LSTM layer
        lstm_layers: Stacked LSTM layers
        forget_bias: Initial forget-gate bias
    """

    layers: str = "conv3x3x16,relu,pool,conv3x3x32,relu,pool,fc128,relu"
    lstm_hidden: int = 128
    lstm_layers: int = 1
    forget_bias: float = 1.0

    @field_validator("lstm_hidden", "lstm_layers")
    @classmethod
    def validate_counts(cls, value: int, info) -> int:
        if value < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {value}")
        return value

    @field_validator("forget_bias")
    @classmethod
    def validate_bias(cls, value: float) -> float:
        return validate_finite_number(value, "forget_bias")


class TrainingConfig(SdtdModel):
    """Stream training hyperparameters.

    Attributes:
        iterations: SGD iterations of the (joint) training phase
        batch_size: Clips per iteration
        learning_rate: Initial learning rate
        momentum: Heavy-ball momentum
        lr_steps: Iterations at which the rate is multiplied by ``lr_gamma``
        lr_gamma: Learning-rate drop factor
        precision: Tensor precision
        two_phase: Train the CNN with a per-step head before the joint model
        cnn_phase_iterations: Iterations of the CNN-only phase
        test_clips: Clips per test video
        log_every: Iterations between progress log lines
    """

    iterations: int = 300
    batch_size: int = 4
    learning_rate: float = 5e-3
    momentum: float = 0.9
    lr_steps: Tuple[int, ...] = (200,)
    lr_gamma: float = 0.1
    precision: Precision = Precision.FLOAT32
    two_phase: bool = False
    cnn_phase_iterations: int = 100
    test_clips: int = 1
    log_every: int = 25

    @field_validator("iterations", "batch_size", "test_clips", "log_every")
    @classmethod
    def validate_counts(cls, value: int, info) -> int:
        if value < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {value}")
        return value

    @field_validator("cnn_phase_iterations")
    @classmethod
    def validate_phase(cls, value: int) -> int:
        if value < 0:
            raise ValueError(f"cnn_phase_iterations must be >= 0, got {value}")
        return value

    @field_validator("learning_rate", "lr_gamma")
    @classmethod
    def validate_positive_fields(cls, value: float, info) -> float:
        return validate_positive(value, info.field_name)

    @field_validator("momentum")
    @classmethod
    def validate_momentum(cls, value: float) -> float:
        validate_non_negative(value, "momentum")
        if value >= 1.0:
            raise ValueError(f"momentum must be < 1, got {value}")
        return value


class FusionConfig(SdtdModel):
    """Late-fusion weights per stream."""

    spatial: float = 1.0
    temporal: float = 1.0
    sdtd: float = 1.0

    @field_validator("spatial", "temporal", "sdtd")
    @classmethod
    def validate_weight(cls, value: float, info) -> float:
        return validate_positive(value, info.field_name)

    def weight_for(self, kind: StreamKind) -> float:
        """Get the weight of one stream."""
        return float(getattr(self, StreamKind(kind).value))


class MotionClass(SdtdModel):
    """A synthetic long-term motion pattern.

    All classes move the sprite with the same mean speed per frame; they
    differ only in path shape and temporal structure.

    Attributes:
        name: Motion pattern
        speed: Mean displacement per frame in pixels
        radius: Orbit radius of the circular class
        period: Frames per zigzag leg, and per stop-and-go cycle
        duty: Moving fraction of a stop-and-go cycle
    """

    name: MotionKind
    speed: float = 2.0
    radius: float = 14.0
    period: int = 8
    duty: float = 0.5

    @field_validator("speed", "radius")
    @classmethod
    def validate_positive_fields(cls, value: float, info) -> float:
        return validate_positive(value, info.field_name)

    @field_validator("period")
    @classmethod
    def validate_period(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f"period must be >= 2, got {value}")
        return value

    @field_validator("duty")
    @classmethod
    def validate_duty(cls, value: float) -> float:
        if not 0.0 < value <= 1.0:
            raise ValueError(f"duty must be in range (0, 1], got {value}")
        return value


class SceneSpec(SdtdModel):
    """Synthetic scene layout.

    Attributes:
        height: Frame height in pixels
        width: Frame width in pixels
        sprite_size: Side of the square textured sprite
        frames: Frames per video
        camera_pan: Background displacement per frame (dx, dy)
        texture_sigma: Gaussian band limit of the noise textures
    """

    height: int = 64
    width: int = 64
    sprite_size: int = 12
    frames: int = 60
    camera_pan: Tuple[float, float] = (0.0, 0.0)
    texture_sigma: float = 1.5

    @field_validator("height", "width")
    @classmethod
    def validate_size(cls, value: int, info) -> int:
        if value < 16:
            raise ValueError(f"{info.field_name} must be >= 16, got {value}")
        return value

    @field_validator("sprite_size")
    @classmethod
    def validate_sprite(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f"sprite_size must be >= 2, got {value}")
        return value

    @field_validator("frames")
    @classmethod
    def validate_frames(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f"frames must be >= 2, got {value}")
        return value

    @field_validator("texture_sigma")
    @classmethod
    def validate_sigma(cls, value: float) -> float:
        return validate_positive(value, "texture_sigma")


class DatasetSpec(SdtdModel):
    """Synthetic dataset layout.

    With ``random_placement`` every video gets its own seeded path translation
    and start phase, so a class cannot be recognized by where its sprite is.
    """

    classes: Tuple[MotionKind, ...] = (
        MotionKind.LINEAR,
        MotionKind.CIRCULAR,
        MotionKind.ZIGZAG,
        MotionKind.STOP_AND_GO,
    )
    per_class_train: int = 8
    per_class_test: int = 4
    speed: float = 2.0
    scene: SceneSpec = Field(default_factory=SceneSpec)
    random_placement: bool = True

    @field_validator("per_class_train", "per_class_test")
    @classmethod
    def validate_counts(cls, value: int, info) -> int:
        if value < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {value}")
        return value

    @field_validator("speed")
    @classmethod
    def validate_speed(cls, value: float) -> float:
        return validate_positive(value, "speed")
