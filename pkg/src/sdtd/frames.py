"""Frame containers and the small image operations shared by every stage.

Frames are stored as ``(H, W, C)`` float64 arrays with values in [0, 1]
after loading. Containers are plain dataclasses (pydantic models stay
reserved for configuration); they validate their invariants on creation.
"""

from dataclasses import dataclass, field
from typing import Iterator, List, Sequence, Tuple

import numpy as np
from scipy import ndimage

from sdtd.models.exceptions import ShapeError
from sdtd.models.validators import ensure_finite_array

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass
class Frame:
    """A single image.

    Attributes:
        data: Array of shape (H, W, C) with C in {1, 3}
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, np.newaxis]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ShapeError(f"frame must be (H, W, 1) or (H, W, 3), got shape {data.shape}")
        ensure_finite_array(data, "frame")
        self.data = data

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.height, self.width, self.channels)

    @property
    def is_gray(self) -> bool:
        return self.channels == 1

    def plane(self) -> np.ndarray:
        """Get the (H, W) intensity plane of a grayscale frame.

        Raises:
            ShapeError: If the frame has three channels
        """
        if not self.is_gray:
            raise ShapeError("expected a grayscale frame, got 3 channels")
        return self.data[:, :, 0]

    @classmethod
    def from_plane(cls, plane: np.ndarray) -> "Frame":
        """Wrap an (H, W) array as a grayscale frame."""
        return cls(np.asarray(plane, dtype=np.float64)[:, :, np.newaxis])


@dataclass
class FrameSequence:
    """An ordered video as a list of equally sized frames.

    Attributes:
        frames: Frames in temporal order
        fps: Frames per second (metadata only)
        id: Video identifier
    """

    frames: List[Frame]
    fps: float = 25.0
    id: str = ""
    names: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.frames:
            first = self.frames[0].shape
            for index, frame in enumerate(self.frames):
                if frame.shape != first:
                    raise ShapeError(
                        f"frame {index} has shape {frame.shape}, expected {first}"
                    )

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)

    def __getitem__(self, index: int) -> Frame:
        return self.frames[index]

    @property
    def size(self) -> Tuple[int, int]:
        """Frame size as (H, W)."""
        if not self.frames:
            return (0, 0)
        return (self.frames[0].height, self.frames[0].width)


def to_gray(frame: Frame) -> Frame:
    """Convert a frame to luma (0.299 R + 0.587 G + 0.114 B).

    Grayscale frames are returned unchanged.
    """
    if frame.is_gray:
        return frame
    return Frame.from_plane(frame.data @ LUMA_WEIGHTS)


def resize_bilinear(image: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    """Bilinearly resample an (H, W) or (H, W, C) array to ``size=(w, h)``.

    Pixel centers are aligned (``src = (dst + 0.5) * in / out - 0.5``) and
    samples outside the image clamp to the border, so equal sizes return an
    identical copy.
    """
    out_w, out_h = size
    in_h, in_w = image.shape[:2]
    if (out_w, out_h) == (in_w, in_h):
        return np.array(image, copy=True)
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return sample_bilinear(image, grid_x, grid_y)


def sample_bilinear(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample an image at fractional positions, clamping to the border.

    Args:
        image: Array of shape (H, W) or (H, W, C)
        xs: Column coordinates, any shape
        ys: Row coordinates, same shape as ``xs``

    Returns:
        Samples with shape ``xs.shape`` (+ ``(C,)`` for multi-channel input)
    """
    coords = np.array([ys, xs])
    if image.ndim == 2:
        return ndimage.map_coordinates(image, coords, order=1, mode="nearest")
    channels = [
        ndimage.map_coordinates(image[:, :, c], coords, order=1, mode="nearest")
        for c in range(image.shape[2])
    ]
    return np.stack(channels, axis=-1)


def stack_planes(frames: Sequence[Frame]) -> np.ndarray:
    """Stack frames into an (N, H, W, C) array."""
    return np.stack([frame.data for frame in frames])
