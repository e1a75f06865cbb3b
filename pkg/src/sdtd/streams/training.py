"""Training and evaluation of the three CNN-RNN streams."""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from sdtd.models.configs import FusionConfig, StreamKind
from sdtd.models.exceptions import ConfigError, DataError, FormatError, NumericalError, ShapeError
from sdtd.models.pipeline import PipelineConfig
from sdtd.nn.model import CnnRnnModel, dtype_for
from sdtd.nn.optim import SgdState, sgd_momentum_update, step_learning_rate
from sdtd.protocols import StreamModel
from sdtd.streams.fusion import Prediction, aggregate_clip, fuse_streams
from sdtd.streams.inputs import TEST, clip_indices, clip_offsets, preprocess_clip, sample_clip
from sdtd.videoio import DatasetManifest, ManifestEntry

logger = logging.getLogger(__name__)

# (entry, stream) -> ordered (H, W, C) items in network units
ItemLoader = Callable[[ManifestEntry, StreamKind], List[np.ndarray]]

STREAM_ORDER = (StreamKind.SPATIAL, StreamKind.TEMPORAL, StreamKind.SDTD)


@dataclass
class TrainingResult:
    """A trained stream model and its loss log.

    Attributes:
        kind: Stream the model recognizes
        model: Trained network
        log: One record per iteration (phase, iteration, learning rate, loss)
    """

    kind: StreamKind
    model: CnnRnnModel
    log: List[Dict[str, object]] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return float(self.log[-1]["loss"]) if self.log else float("nan")


def _split_items(
    manifest: DatasetManifest, split: str, kind: StreamKind, loader: ItemLoader
) -> Tuple[List[ManifestEntry], List[List[np.ndarray]]]:
    entries = manifest.split(split)
    if not entries:
        raise DataError(f"empty {split} split")
    items = []
    for entry in entries:
        video_items = loader(entry, kind)
        if not video_items:
            raise DataError(f"{entry.path}: no {StreamKind(kind).value} inputs")
        items.append(video_items)
    return entries, items


def stream_input_shape(item: np.ndarray, config: PipelineConfig) -> Tuple[int, int, int]:
    """(C, H, W) network input for items shaped like ``item`` after cropping."""
    channels = item.shape[2] if item.ndim == 3 else 1
    crop_w, crop_h = config.preprocess.crop
    return channels, crop_h, crop_w


def load_stream_model(
    path,
    manifest: DatasetManifest,
    kind: StreamKind,
    loader: ItemLoader,
    config: Optional[PipelineConfig] = None,
) -> CnnRnnModel:
    """Rebuild a stream's architecture from config and load its checkpoint.

    The input channel count is read off the first test video's items.

    Raises:
        DataError: If the test split is empty
        ShapeError: If the checkpoint does not fit the architecture
    """
    config = config or PipelineConfig()
    entries = manifest.split("test")
    if not entries:
        raise DataError("empty test split")
    items = loader(entries[0], StreamKind(kind))
    if not items:
        raise DataError(f"{entries[0].path}: no {StreamKind(kind).value} inputs")
    model = CnnRnnModel(
        stream_input_shape(items[0], config),
        manifest.num_classes,
        config.architecture,
        seed=config.seed,
        dtype=dtype_for(config.training.precision),
    )
    model.load(path)
    return model


def _batch_order(count: int, rng: np.random.Generator):
    """Endless stream of video indices, one shuffled pass after another."""
    while True:
        yield from rng.permutation(count).tolist()


def train_stream(
    manifest: DatasetManifest,
    kind: StreamKind,
    loader: ItemLoader,
    config: Optional[PipelineConfig] = None,
    seed: Optional[int] = None,
) -> TrainingResult:
    """Train one stream on the manifest's train split.

    Every clip takes a random start offset and the crop/flip drawn for its
    clip id. With ``training.two_phase`` the CNN is first trained through a
    per-step linear head, then the joint model is trained.

    Args:
        manifest: Dataset manifest
        kind: Stream to train
        loader: Supplies the stream items of a video
        config: Pipeline configuration (defaults when omitted)
        seed: Overrides ``config.seed``

    Returns:
        TrainingResult

    Raises:
        DataError: If the train split is empty
        NumericalError: If the loss or a gradient becomes nonfinite
    """
    config = config or PipelineConfig()
    seed = config.seed if seed is None else seed
    kind = StreamKind(kind)
    training = config.training
    entries, items = _split_items(manifest, "train", kind, loader)
    model = CnnRnnModel(
        stream_input_shape(items[0][0], config),
        manifest.num_classes,
        config.architecture,
        seed=seed,
        dtype=dtype_for(training.precision),
    )
    rng = np.random.default_rng(seed)
    order = _batch_order(len(entries), rng)
    stride = config.clip.stride_for(kind)
    phases = [("cnn", training.cnn_phase_iterations)] if training.two_phase else []
    phases.append(("joint", training.iterations))

    result = TrainingResult(kind, model)
    clip_id = 0
    for phase, iterations in phases:
        state = SgdState(training.learning_rate, training.momentum)
        for iteration in range(iterations):
            batch, labels = [], []
            for video in itertools.islice(order, training.batch_size):
                video_items = items[video]
                span = clip_indices(len(video_items), config.clip.steps, stride)[-1]
                offset = int(rng.integers(0, max(1, len(video_items) - span)))
                clip = sample_clip(video_items, config.clip, offset, kind)
                batch.append(preprocess_clip(clip, config.preprocess, clip_id=clip_id, seed=seed))
                labels.append(entries[video].label)
                clip_id += 1
            state.learning_rate = step_learning_rate(
                training.learning_rate, iteration, training.lr_steps, training.lr_gamma
            )
            loss, grads = model.loss_and_grads(np.stack(batch), np.array(labels), cnn_only=phase == "cnn")
            if not np.isfinite(loss):
                raise NumericalError(f"{kind.value} {phase} iteration {iteration}: nonfinite loss")
            sgd_momentum_update(model.parameters(), grads, state)
            result.log.append(
                {"phase": phase, "iteration": iteration, "learning_rate": state.learning_rate, "loss": loss}
            )
            if iteration % training.log_every == 0 or iteration == iterations - 1:
                logger.info("%s %s iteration %d: loss %.4f", kind.value, phase, iteration, loss)
    return result


def stream_forward(clip: np.ndarray, model: StreamModel) -> List[Prediction]:
    """Per-step predictions for one (T, C, H, W) clip.

    Raises:
        ShapeError: If the clip does not fit the model
    """
    clip = np.asarray(clip)
    if clip.ndim != 4:
        raise ShapeError(f"clip must be (T, C, H, W), got {clip.shape}")
    return [Prediction(p) for p in model.predict(clip[np.newaxis])[0]]


def predict_video(
    items: Sequence[np.ndarray], model: StreamModel, kind: StreamKind, config: PipelineConfig
) -> Prediction:
    """Stream prediction of one video.

    Probabilities are averaged over the ten crop variants, then over the
    clip's steps, then over ``training.test_clips`` clips.
    """
    kind = StreamKind(kind)
    stride = config.clip.stride_for(kind)
    clip_predictions = []
    for offset in clip_offsets(len(items), config.clip.steps, stride, config.training.test_clips):
        clip = sample_clip(items, config.clip, offset, kind)
        variants = preprocess_clip(clip, config.preprocess, mode=TEST)
        steps = model.predict(variants).mean(axis=0)
        clip_predictions.append(aggregate_clip([Prediction(p) for p in steps]))
    return aggregate_clip(clip_predictions)


def confusion_matrix(labels: Sequence[int], predicted: Sequence[int], num_classes: int) -> np.ndarray:
    """Counts with true classes as rows and predicted classes as columns."""
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    for truth, guess in zip(labels, predicted):
        matrix[truth, guess] += 1
    return matrix


def subset_name(kinds: Sequence[StreamKind]) -> str:
    return "+".join(k.value for k in STREAM_ORDER if k in kinds)


@dataclass
class EvaluationReport:
    """Test-split metrics.

    Attributes:
        class_names: Class order of the matrices
        streams: Streams that were fused
        accuracy: Top-1 accuracy of the fusion of every stream
        per_class_accuracy: Accuracy per class name (None without test videos)
        confusion: Rows are true classes, columns predictions
        subset_accuracy: Accuracy of every nonempty stream subset
        prediction_changes: Per class, test videos that became correct
            ("correct") or wrong ("error") when sdtd joins spatial+temporal
        videos: Per-video label and predicted classes
    """

    class_names: List[str]
    streams: List[str]
    accuracy: float
    per_class_accuracy: Dict[str, Optional[float]]
    confusion: List[List[int]]
    subset_accuracy: Dict[str, float]
    prediction_changes: Dict[str, Dict[str, int]]
    videos: List[Dict[str, object]]

    def to_metrics(self) -> Dict[str, object]:
        return {
            "accuracy": self.accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "confusion": self.confusion,
            "subset_accuracy": self.subset_accuracy,
            "prediction_changes": self.prediction_changes,
        }


def evaluate(
    manifest: DatasetManifest,
    models: Mapping[StreamKind, StreamModel],
    loader: ItemLoader,
    config: Optional[PipelineConfig] = None,
    weights: Optional[Mapping[StreamKind, float]] = None,
) -> EvaluationReport:
    """Evaluate one or more streams and their late fusion on the test split.

    Args:
        manifest: Dataset manifest
        models: Model per stream
        loader: Supplies the stream items of a video
        config: Pipeline configuration
        weights: Fusion weights; ``config.fusion`` when omitted

    Returns:
        EvaluationReport

    Raises:
        DataError: If the test split is empty
        ShapeError: If a model's class count differs from the manifest's
        ConfigError: If no model is given
    """
    config = config or PipelineConfig()
    fusion: Mapping = weights if weights is not None else config.fusion
    kinds = [k for k in STREAM_ORDER if k in {StreamKind(m) for m in models}]
    if not kinds:
        raise ConfigError("no stream models to evaluate")
    models = {StreamKind(k): m for k, m in models.items()}
    for kind in kinds:
        if models[kind].num_classes != manifest.num_classes:
            raise ShapeError(
                f"{kind.value} model has {models[kind].num_classes} classes, manifest {manifest.num_classes}"
            )
    entries = manifest.split("test")
    if not entries:
        raise DataError("empty test split")

    per_video: List[Dict[StreamKind, Prediction]] = []
    for entry in entries:
        predictions = {}
        for kind in kinds:
            predictions[kind] = predict_video(loader(entry, kind), models[kind], kind, config)
        per_video.append(predictions)
        logger.debug("%s: %s", entry.path, {k.value: p.label for k, p in predictions.items()})

    report = score_predictions(
        [entry.label for entry in entries],
        per_video,
        manifest.class_names,
        fusion,
        [entry.path for entry in entries],
    )
    logger.info("evaluated %d videos with %s: accuracy %.3f", len(entries), report.streams, report.accuracy)
    return report


def score_predictions(
    labels: Sequence[int],
    per_video: Sequence[Mapping[StreamKind, Prediction]],
    class_names: Sequence[str],
    fusion: Union[FusionConfig, Mapping[StreamKind, float], None] = None,
    paths: Optional[Sequence[str]] = None,
) -> EvaluationReport:
    """Fuse per-stream video predictions and compute every metric.

    Args:
        labels: True class per video
        per_video: Prediction per stream for each video; all videos must
            carry the same streams
        class_names: Class order
        fusion: Fusion weights, uniform when omitted
        paths: Video paths for the per-video listing

    Returns:
        EvaluationReport
    """
    if not per_video:
        raise DataError("no videos to score")
    fusion = fusion if fusion is not None else FusionConfig()
    kinds = [k for k in STREAM_ORDER if k in {StreamKind(s) for s in per_video[0]}]
    per_video = [{StreamKind(k): p for k, p in video.items()} for video in per_video]
    labels = list(labels)
    paths = list(paths) if paths is not None else [str(i) for i in range(len(labels))]

    def fused_labels(subset: Sequence[StreamKind]) -> List[int]:
        return [fuse_streams({k: video[k] for k in subset}, _weights_for(fusion, subset)).label for video in per_video]

    subset_accuracy: Dict[str, float] = {}
    for size in range(1, len(kinds) + 1):
        for subset in itertools.combinations(kinds, size):
            guesses = fused_labels(subset)
            subset_accuracy[subset_name(subset)] = float(np.mean(np.equal(guesses, labels)))

    predicted = fused_labels(kinds)
    matrix = confusion_matrix(labels, predicted, len(class_names))
    per_class: Dict[str, Optional[float]] = {}
    for index, name in enumerate(class_names):
        total = int(matrix[index].sum())
        per_class[name] = float(matrix[index, index] / total) if total else None

    changes: Dict[str, Dict[str, int]] = {}
    if len(kinds) == len(STREAM_ORDER):
        before = fused_labels((StreamKind.SPATIAL, StreamKind.TEMPORAL))
        changes = {name: {"correct": 0, "error": 0} for name in class_names}
        for truth, old, new in zip(labels, before, predicted):
            name = class_names[truth]
            if old != truth and new == truth:
                changes[name]["correct"] += 1
            elif old == truth and new != truth:
                changes[name]["error"] += 1

    videos = [
        {
            "path": path,
            "label": truth,
            "predicted": guess,
            "streams": {k.value: video[k].label for k in kinds},
            "probs": {k.value: video[k].probs for k in kinds},
        }
        for path, truth, guess, video in zip(paths, labels, predicted, per_video)
    ]
    return EvaluationReport(
        class_names=list(class_names),
        streams=[k.value for k in kinds],
        accuracy=float(np.mean(np.equal(predicted, labels))),
        per_class_accuracy=per_class,
        confusion=matrix.tolist(),
        subset_accuracy=subset_accuracy,
        prediction_changes=changes,
        videos=videos,
    )


def report_predictions(document: Mapping) -> Tuple[List[int], List[Dict[StreamKind, Prediction]], List[str]]:
    """Recover labels, per-stream predictions and paths from a saved report.

    Raises:
        FormatError: If a video record is missing fields or names an unknown stream
    """
    labels, per_video, paths = [], [], []
    try:
        for video in document["videos"]:
            labels.append(int(video["label"]))
            per_video.append({StreamKind(k): Prediction(np.array(v)) for k, v in video["probs"].items()})
            paths.append(str(video["path"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed evaluation report: {exc!r}") from exc
    return labels, per_video, paths


def _weights_for(fusion, subset: Sequence[StreamKind]) -> Dict[StreamKind, float]:
    if isinstance(fusion, FusionConfig):
        return {k: fusion.weight_for(k) for k in subset}
    by_kind = {StreamKind(k): float(v) for k, v in fusion.items()}
    return {k: by_kind.get(k, 1.0) for k in subset}
