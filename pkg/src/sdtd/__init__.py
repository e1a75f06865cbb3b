"""sdtd - trajectory texture image sequences and three-stream action recognition."""

__version__ = "0.1.0"
__author__ = "sdtd Contributors"

from sdtd.frames import Frame, FrameSequence, to_gray
from sdtd.flow import FlowField, horn_schunck, make_solver, tvl1_flow
from sdtd.egomotion import compensate_flow, compensate_sequence, estimate_homography_ransac
from sdtd.trajectories import Trajectory, TrajectorySet, extract_trajectories
from sdtd.texture import TtiSequence, build_sequence, export_tti_png
from sdtd.protocols import FlowSolver, StreamModel
from sdtd.models.exceptions import (
    ConfigError, DataError, FormatError, GeometryError, NumericalError, SdtdError, ShapeError
)
from sdtd.models.pipeline import PipelineConfig
from sdtd.serialization import EnhancedJSONEncoder, load_json, save_json
from sdtd.nn import CnnRnnModel, grad_check
from sdtd.streams import Prediction, evaluate, fuse_streams, train_stream
from sdtd.datagen import generate_dataset, generate_video

__all__ = [
    # Frames and flow
    "Frame",
    "FrameSequence",
    "to_gray",
    "FlowField",
    "horn_schunck",
    "make_solver",
    "tvl1_flow",
    # Camera motion
    "compensate_flow",
    "compensate_sequence",
    "estimate_homography_ransac",
    # Trajectories and texture images
    "Trajectory",
    "TrajectorySet",
    "extract_trajectories",
    "TtiSequence",
    "build_sequence",
    "export_tti_png",
    # Protocols
    "FlowSolver",
    "StreamModel",
    # Errors
    "SdtdError",
    "ConfigError",
    "DataError",
    "FormatError",
    "ShapeError",
    "GeometryError",
    "NumericalError",
    # Configuration and serialization
    "PipelineConfig",
    "EnhancedJSONEncoder",
    "load_json",
    "save_json",
    # Networks and streams
    "CnnRnnModel",
    "grad_check",
    "Prediction",
    "evaluate",
    "fuse_streams",
    "train_stream",
    # Synthetic data
    "generate_dataset",
    "generate_video",
    "__version__",
]
