"""Class-probability predictions, their clip aggregation and late fusion."""

from dataclasses import dataclass
from typing import Dict, Mapping, Sequence, Union

import numpy as np

from sdtd.models.configs import FusionConfig, StreamKind
from sdtd.models.exceptions import ConfigError, DataError, ShapeError

SIMPLEX_TOL = 1e-6


@dataclass
class Prediction:
    """A probability vector over classes.

    Attributes:
        probs: Nonnegative length-K vector summing to 1
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ShapeError(f"prediction must be a nonempty vector, got shape {probs.shape}")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > SIMPLEX_TOL:
            raise DataError(f"prediction is not on the simplex (sum {probs.sum():.8f})")
        self.probs = probs

    @property
    def num_classes(self) -> int:
        return int(self.probs.size)

    @property
    def label(self) -> int:
        """Most probable class; ties go to the lowest index."""
        return int(np.argmax(self.probs))


def aggregate_clip(predictions: Sequence[Prediction]) -> Prediction:
    """Mean of per-step predictions."""
    if not predictions:
        raise DataError("no predictions to aggregate")
    _check_classes(predictions)
    return Prediction(np.mean([p.probs for p in predictions], axis=0))


def _check_classes(predictions: Sequence[Prediction]) -> None:
    counts = {p.num_classes for p in predictions}
    if len(counts) > 1:
        raise ShapeError(f"predictions disagree on class count: {sorted(counts)}")


def fuse_streams(
    predictions: Mapping[Union[StreamKind, str], Prediction],
    weights: Union[FusionConfig, Mapping[Union[StreamKind, str], float], None] = None,
) -> Prediction:
    """Weighted mean of per-stream predictions, renormalized to sum 1.

    Args:
        predictions: Prediction per stream
        weights: Positive weight per stream; uniform when omitted

    Raises:
        ShapeError: If the streams disagree on class count
        ConfigError: On a missing or nonpositive weight
    """
    if not predictions:
        raise DataError("no streams to fuse")
    _check_classes(list(predictions.values()))
    total = np.zeros(next(iter(predictions.values())).num_classes)
    for kind, prediction in predictions.items():
        weight = _weight(weights, kind)
        if not weight > 0:
            raise ConfigError(f"fusion weight of {StreamKind(kind).value} must be positive, got {weight}")
        total += weight * prediction.probs
    return Prediction(total / total.sum())


def _weight(weights, kind: Union[StreamKind, str]) -> float:
    kind = StreamKind(kind)
    if weights is None:
        return 1.0
    if isinstance(weights, FusionConfig):
        return weights.weight_for(kind)
    by_value: Dict[str, float] = {StreamKind(k).value: float(v) for k, v in weights.items()}
    if kind.value not in by_value:
        raise ConfigError(f"no fusion weight for stream {kind.value}")
    return by_value[kind.value]


def parse_fusion_weights(text: str) -> Dict[StreamKind, float]:
    """Parse ``spatial=1,temporal=1,sdtd=2`` into weights.

    Raises:
        ConfigError: On malformed entries or unknown streams
    """
    weights: Dict[StreamKind, float] = {}
    for part in (p.strip() for p in text.split(",") if p.strip()):
        name, sep, value = part.partition("=")
        try:
            kind = StreamKind(name.strip())
            weights[kind] = float(value) if sep else 1.0
        except ValueError as exc:
            raise ConfigError(f"bad fusion entry {part!r}: {exc}") from exc
    return weights
