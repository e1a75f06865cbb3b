"""Trajectory Texture images.

Trajectories are rasterized onto a float canvas, one pixel per trajectory
point, with last-write-wins semantics. Three-channel canvases hold
``(dx, dy, |d|)``; one-channel canvases hold ``|d|``. An overwrite counter
tracks how many points landed on already written pixels; once it exceeds
the threshold P at a frame-group boundary, the canvas is emitted and a new
one started, so a video becomes a sequence of images.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from sdtd.models.configs import OverwriteRule, TtiConfig, TtiMode
from sdtd.models.exceptions import ShapeError
from sdtd.models.validators import ensure_finite_array
from sdtd.trajectories import Trajectory, TrajectorySet, round_half_up

logger = logging.getLogger(__name__)


@dataclass
class TtiState:
    """The in-progress canvas and its overwrite bookkeeping.

    ``written`` is true exactly where some canvas channel is nonzero, so a
    zero-displacement write leaves its pixel unwritten.

    Attributes:
        canvas: (H, W, C) float32 image
        written: (H, W) mask S
        overwrite_count: Counter O since the last reset
        threshold: Emission threshold P
        rule: Overwrite counting rule
        images_emitted: Canvases emitted so far
        pending: Pixels written in the current frame group (literal rule)
    """

    canvas: np.ndarray
    written: np.ndarray
    threshold: int
    rule: OverwriteRule = OverwriteRule.PRE_WRITE
    overwrite_count: int = 0
    images_emitted: int = 0
    pending: List[Tuple[int, int]] = field(default_factory=list)

    @classmethod
    def empty(
        cls,
        frame_size: Tuple[int, int],
        threshold: int,
        mode: TtiMode = TtiMode.THREE_CHANNEL,
        rule: OverwriteRule = OverwriteRule.PRE_WRITE,
    ) -> "TtiState":
        """Create a blank state for a frame size."""
        if threshold < 1:
            raise ValueError(f"threshold must be >= 1, got {threshold}")
        height, width = frame_size
        channels = 1 if TtiMode(mode) == TtiMode.ONE_CHANNEL else 3
        return cls(
            canvas=np.zeros((height, width, channels), dtype=np.float32),
            written=np.zeros((height, width), dtype=bool),
            threshold=threshold,
            rule=OverwriteRule(rule),
        )

    @property
    def channels(self) -> int:
        return int(self.canvas.shape[2])

    def reset(self) -> None:
        self.canvas[:] = 0.0
        self.written[:] = False
        self.overwrite_count = 0
        self.pending.clear()

    def close_group(self) -> None:
        """Finish a frame group; the literal rule counts its points here."""
        if self.rule == OverwriteRule.LITERAL:
            self.overwrite_count += sum(1 for x, y in self.pending if self.written[y, x])
        self.pending.clear()


def rasterize_trajectory(state: TtiState, traj: Trajectory) -> TtiState:
    """Write every point of a trajectory onto the canvas.

    Args:
        state: Canvas state, updated in place
        traj: Trajectory with coordinates inside the canvas

    Returns:
        The same state

    Raises:
        ShapeError: If a rounded coordinate falls outside the canvas
    """
    height, width = state.written.shape
    pixels = round_half_up(traj.positions)
    deltas = traj.deltas.astype(np.float64)
    if pixels.size and (
        pixels[:, 0].min() < 0
        or pixels[:, 1].min() < 0
        or pixels[:, 0].max() >= width
        or pixels[:, 1].max() >= height
    ):
        raise ShapeError(f"trajectory starting at frame {traj.start_frame} leaves the canvas")

    pre_write = state.rule == OverwriteRule.PRE_WRITE
    for (x, y), (dx, dy) in zip(pixels, deltas):
        if pre_write and state.written[y, x]:
            state.overwrite_count += 1
        magnitude = np.hypot(dx, dy)
        if state.channels == 3:
            state.canvas[y, x] = (dx, dy, magnitude)
        else:
            state.canvas[y, x, 0] = magnitude
        state.written[y, x] = bool(np.any(state.canvas[y, x] != 0.0))
        if not pre_write:
            state.pending.append((int(x), int(y)))
    return state


@dataclass
class TtiSequence:
    """The Trajectory Texture images of one video.

    Attributes:
        images: (H, W, C) float canvases in temporal order
        segment_bounds: (first, last) start frame of the trajectory groups
            rasterized into each image
        mode: Channel layout
    """

    images: List[np.ndarray]
    segment_bounds: List[Tuple[int, int]]
    mode: TtiMode = TtiMode.THREE_CHANNEL

    def __post_init__(self) -> None:
        if len(self.images) != len(self.segment_bounds):
            raise ShapeError(
                f"{len(self.images)} images but {len(self.segment_bounds)} segment bounds"
            )
        self.segment_bounds = [(int(a), int(b)) for a, b in self.segment_bounds]
        self.mode = TtiMode(self.mode)

    def __len__(self) -> int:
        return len(self.images)

    def shuffled(self, seed: int) -> "TtiSequence":
        """Return a copy with the images in a seeded random order."""
        order = np.random.default_rng(seed).permutation(len(self.images))
        return TtiSequence(
            [self.images[i] for i in order],
            [self.segment_bounds[i] for i in order],
            self.mode,
        )


def build_sequence(
    trajectories: TrajectorySet,
    frame_size: Tuple[int, int],
    threshold: int,
    mode: TtiMode = TtiMode.THREE_CHANNEL,
    rule: OverwriteRule = OverwriteRule.PRE_WRITE,
) -> TtiSequence:
    """Convert a video's trajectories into a sequence of texture images.

    Trajectories are rasterized frame group by frame group (ascending start
    frame, stored order within a group). After a group, when the overwrite
    count exceeds ``threshold`` the canvas is emitted and reset. The last
    canvas is emitted if any pixel is written.

    Args:
        trajectories: Trajectories of one video
        frame_size: (H, W) of the canvas
        threshold: Overwrite threshold P
        mode: Channel layout
        rule: Overwrite counting rule

    Returns:
        TtiSequence
    """
    state = TtiState.empty(frame_size, threshold, mode, rule)
    images: List[np.ndarray] = []
    bounds: List[Tuple[int, int]] = []
    first: Optional[int] = None
    last: Optional[int] = None

    for start, group in trajectories.grouped_by_start():
        for traj in group:
            rasterize_trajectory(state, traj)
        state.close_group()
        first = start if first is None else first
        last = start
        if state.overwrite_count > state.threshold:
            images.append(state.canvas.copy())
            bounds.append((first, last))
            state.images_emitted += 1
            state.reset()
            first = None

    if first is not None and np.any(state.written):
        images.append(state.canvas.copy())
        bounds.append((first, last))
        state.images_emitted += 1
    logger.debug("built %d texture images from %d trajectories", len(images), len(trajectories))
    return TtiSequence(images, bounds, TtiMode(mode))


def build_sequence_from_config(
    trajectories: TrajectorySet, config: Optional[TtiConfig] = None
) -> TtiSequence:
    """Build a sequence with P, mode and rule taken from a :class:`TtiConfig`."""
    config = config or TtiConfig()
    height, width = trajectories.frame_size
    return build_sequence(
        trajectories,
        trajectories.frame_size,
        config.threshold_for(height, width),
        TtiMode(config.mode),
        OverwriteRule(config.overwrite_rule),
    )


def export_tti_png(canvas: np.ndarray, bound: float = 20.0) -> np.ndarray:
    """Quantize a canvas to 8 bits for viewing.

    Signed displacement channels map by ``128 + 127.5 * c / bound`` and the
    magnitude channel by ``255 * c / bound``; values are rounded and clamped
    to [0, 255]. One-channel canvases hold magnitudes only.

    Args:
        canvas: (H, W, 3) or (H, W, 1) float canvas
        bound: Displacement mapped to the ends of the range

    Returns:
        uint8 array with the canvas shape

    Raises:
        NumericalError: If the canvas holds NaN or Inf
    """
    if bound <= 0:
        raise ValueError(f"bound must be positive, got {bound}")
    canvas = np.asarray(canvas, dtype=np.float64)
    ensure_finite_array(canvas, "texture canvas")
    if canvas.ndim != 3 or canvas.shape[2] not in (1, 3):
        raise ShapeError(f"canvas must be (H, W, 1) or (H, W, 3), got {canvas.shape}")
    scaled = np.empty_like(canvas)
    if canvas.shape[2] == 3:
        scaled[:, :, :2] = 128.0 + 127.5 * canvas[:, :, :2] / bound
        scaled[:, :, 2] = 255.0 * canvas[:, :, 2] / bound
    else:
        scaled[:, :, 0] = 255.0 * canvas[:, :, 0] / bound
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def stack_images(images: Sequence[np.ndarray]) -> np.ndarray:
    """Stack canvases into an (N, H, W, C) array."""
    return np.stack(list(images))
