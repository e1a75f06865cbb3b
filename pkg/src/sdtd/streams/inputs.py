"""Stream inputs: temporal flow images, clip sampling and crop/flip preprocessing.

Images enter as (H, W, C) float arrays and leave as (C, h, w) network
tensors. Frames are already in [0, 1]; flow images and texture canvases
are divided by the displacement bound.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple, TypeVar

import numpy as np

from sdtd.flow import FlowField
from sdtd.frames import Frame, resize_bilinear
from sdtd.models.configs import ClipSpec, PreprocessSpec, StreamKind
from sdtd.models.exceptions import ConfigError, DataError, ShapeError
from sdtd.texture import export_tti_png

logger = logging.getLogger(__name__)

T = TypeVar("T")

REPEAT_LAST = "repeat_last"
TRAIN = "train"
TEST = "test"


def build_temporal_input(flow: FlowField) -> Frame:
    """Three-channel flow image ``(u, v, sqrt(u^2 + v^2))``, unquantized."""
    u = flow.u.astype(np.float64)
    v = flow.v.astype(np.float64)
    return Frame(np.stack([u, v, np.hypot(u, v)], axis=-1))


def export_temporal_input(frame: Frame, bound: float = 20.0) -> np.ndarray:
    """Quantize a flow image to uint8 with the texture-image mapping."""
    return export_tti_png(frame.data, bound)


def input_scale(kind: StreamKind, bound: float) -> float:
    """Factor that brings a stream's raw items to roughly unit range."""
    return 1.0 if StreamKind(kind) == StreamKind.SPATIAL else 1.0 / bound


# ---------------------------------------------------------------- clips


def clip_indices(length: int, steps: int, stride: int, offset: int = 0) -> List[int]:
    """Item indices of one clip.

    The stride shrinks (down to 1) until the clip fits in the items after
    ``offset``; positions past the end repeat the last item.
    """
    if length < 1:
        raise DataError("cannot sample a clip from an empty sequence")
    offset = min(max(offset, 0), length - 1)
    if steps > 1:
        stride = max(1, min(stride, (length - 1 - offset) // (steps - 1)))
    return [min(offset + k * stride, length - 1) for k in range(steps)]


def sample_clip(
    items: Sequence[T],
    spec: ClipSpec,
    offset: int = 0,
    kind: StreamKind = StreamKind.SPATIAL,
    pad_policy: str = REPEAT_LAST,
) -> List[T]:
    """Take ``spec.steps`` items starting at ``offset``.

    Args:
        items: Ordered frames, flow images or texture images
        spec: Clip length and strides
        offset: First index
        kind: Stream whose stride applies
        pad_policy: Only ``"repeat_last"`` is supported

    Returns:
        Exactly ``spec.steps`` items

    Raises:
        DataError: If ``items`` is empty
        ConfigError: On an unknown pad policy
    """
    if pad_policy != REPEAT_LAST:
        raise ConfigError(f"unknown pad policy {pad_policy!r}")
    return [items[i] for i in clip_indices(len(items), spec.steps, spec.stride_for(kind), offset)]


def clip_offsets(length: int, steps: int, stride: int, count: int) -> List[int]:
    """Evenly spread start offsets for ``count`` test clips."""
    free = max(0, length - (stride * (steps - 1) + 1))
    if count == 1:
        return [free // 2]
    return [int(round(free * k / (count - 1))) for k in range(count)]


# ---------------------------------------------------------------- crops


@dataclass(frozen=True)
class CropRect:
    """Crop position (x, y) in the resized image plus a horizontal flip bit."""

    x: int
    y: int
    flip: bool = False


def crop_positions(spec: PreprocessSpec) -> List[Tuple[int, int]]:
    """Top-left, top-right, bottom-left, bottom-right and center positions."""
    width, height = spec.resize_to
    crop_w, crop_h = spec.crop
    right, bottom = width - crop_w, height - crop_h
    return [(0, 0), (right, 0), (0, bottom), (right, bottom), (right // 2, bottom // 2)]


def train_crop(spec: PreprocessSpec, clip_id: int, seed: int = 0) -> CropRect:
    """Crop and flip shared by every step of one training clip.

    The draw depends only on ``(seed, clip_id)``.
    """
    rng = np.random.default_rng([seed, clip_id])
    x, y = crop_positions(spec)[int(rng.integers(5))]
    flip = bool(spec.flip and rng.random() < 0.5)
    return CropRect(x, y, flip)


def evaluation_crops(spec: PreprocessSpec) -> List[CropRect]:
    """The ten deterministic test variants: five positions, unflipped then flipped."""
    return [CropRect(x, y, flip) for x, y in crop_positions(spec) for flip in (False, True)]


def resize_for_crop(image: np.ndarray, spec: PreprocessSpec) -> np.ndarray:
    """Bilinear resize of an (H, W) or (H, W, C) image to ``spec.resize_to``."""
    if image.ndim == 2:
        image = image[:, :, np.newaxis]
    return resize_bilinear(image, spec.resize_to)


def crop_resized(resized: np.ndarray, spec: PreprocessSpec, rect: CropRect) -> np.ndarray:
    """Cut one crop from an already resized image.

    Returns:
        (C, crop_h, crop_w) array

    Raises:
        ShapeError: If the crop leaves the resized image
    """
    crop_w, crop_h = spec.crop
    if rect.x + crop_w > resized.shape[1] or rect.y + crop_h > resized.shape[0]:
        raise ShapeError(f"crop {spec.crop} at ({rect.x}, {rect.y}) leaves image {resized.shape[1::-1]}")
    patch = resized[rect.y : rect.y + crop_h, rect.x : rect.x + crop_w]
    if rect.flip:
        patch = patch[:, ::-1]
    return np.ascontiguousarray(patch.transpose(2, 0, 1))


def apply_crop(image: np.ndarray, spec: PreprocessSpec, rect: CropRect) -> np.ndarray:
    """Resize, crop and optionally mirror one (H, W, C) image."""
    return crop_resized(resize_for_crop(image, spec), spec, rect)


def preprocess(
    image: np.ndarray, spec: PreprocessSpec, mode: str = TRAIN, clip_id: int = 0, seed: int = 0
) -> List[np.ndarray]:
    """Crops of one image: one for ``train``, ten for ``test``."""
    if mode == TRAIN:
        return [apply_crop(image, spec, train_crop(spec, clip_id, seed))]
    if mode == TEST:
        resized = resize_for_crop(image, spec)
        return [crop_resized(resized, spec, rect) for rect in evaluation_crops(spec)]
    raise ConfigError(f"unknown preprocess mode {mode!r}")


def preprocess_clip(
    images: Sequence[np.ndarray], spec: PreprocessSpec, mode: str = TRAIN, clip_id: int = 0, seed: int = 0
) -> np.ndarray:
    """Crop a whole clip consistently.

    Returns:
        (T, C, h, w) in train mode, (10, T, C, h, w) in test mode
    """
    if mode == TRAIN:
        rect = train_crop(spec, clip_id, seed)
        return np.stack([apply_crop(image, spec, rect) for image in images])
    if mode == TEST:
        resized = [resize_for_crop(image, spec) for image in images]
        return np.stack(
            [np.stack([crop_resized(r, spec, rect) for r in resized]) for rect in evaluation_crops(spec)]
        )
    raise ConfigError(f"unknown preprocess mode {mode!r}")
