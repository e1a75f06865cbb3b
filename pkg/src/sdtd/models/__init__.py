"""Data models for sdtd."""

from sdtd.models.base import SdtdModel
from sdtd.models.point import Point2D, Correspondence
from sdtd.models.homography import Homography
from sdtd.models.configs import (
    ArchitectureConfig,
    ClipSpec,
    CompensationMode,
    DatasetSpec,
    EgomotionConfig,
    FlowConfig,
    FlowSolverKind,
    FusionConfig,
    HornSchunckParams,
    MotionClass,
    MotionKind,
    OverwriteRule,
    Precision,
    PreprocessSpec,
    SceneSpec,
    StreamKind,
    TrainingConfig,
    TrajectoryConfig,
    TtiConfig,
    TtiMode,
    Tvl1Params,
)
from sdtd.models.pipeline import PipelineConfig

__all__ = [
    "SdtdModel",
    "Point2D",
    "Correspondence",
    "Homography",
    "ArchitectureConfig",
    "ClipSpec",
    "CompensationMode",
    "DatasetSpec",
    "EgomotionConfig",
    "FlowConfig",
    "FlowSolverKind",
    "FusionConfig",
    "HornSchunckParams",
    "MotionClass",
    "MotionKind",
    "OverwriteRule",
    "Precision",
    "PreprocessSpec",
    "SceneSpec",
    "StreamKind",
    "TrainingConfig",
    "TrajectoryConfig",
    "TtiConfig",
    "TtiMode",
    "Tvl1Params",
    "PipelineConfig",
]
