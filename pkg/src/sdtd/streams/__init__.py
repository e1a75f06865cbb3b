"""The three-stream recognizer: inputs, CNN-RNN training, evaluation and late fusion."""

from sdtd.streams.fusion import Prediction, aggregate_clip, fuse_streams, parse_fusion_weights
from sdtd.streams.inputs import (
    CropRect,
    build_temporal_input,
    clip_indices,
    evaluation_crops,
    preprocess,
    preprocess_clip,
    sample_clip,
    train_crop,
)
from sdtd.streams.training import (
    EvaluationReport,
    TrainingResult,
    confusion_matrix,
    evaluate,
    load_stream_model,
    predict_video,
    report_predictions,
    score_predictions,
    stream_forward,
    train_stream,
)

__all__ = [
    "Prediction",
    "aggregate_clip",
    "fuse_streams",
    "parse_fusion_weights",
    "CropRect",
    "build_temporal_input",
    "clip_indices",
    "evaluation_crops",
    "preprocess",
    "preprocess_clip",
    "sample_clip",
    "train_crop",
    "EvaluationReport",
    "TrainingResult",
    "confusion_matrix",
    "evaluate",
    "load_stream_model",
    "predict_video",
    "report_predictions",
    "score_predictions",
    "stream_forward",
    "train_stream",
]
