"""Dense trajectory extraction.

Points are sampled on a regular grid and advected through median-filtered
optical flow. A trajectory is stored as float32 rows ``(x, y, dx, dy)``:
the position at each frame and the displacement taken from it. Positions
are chained in float32, so ``x[l + 1] == x[l] + dx[l]`` holds exactly for
every row but the last. The last row carries the step that would have been
taken next when the track reached ``max_length``, and ``(0, 0)`` otherwise.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from sdtd.flow import FlowField
from sdtd.frames import resize_bilinear
from sdtd.models.configs import TrajectoryConfig
from sdtd.models.exceptions import DataError, ShapeError
from sdtd.models.validators import ensure_finite_array

logger = logging.getLogger(__name__)

Position = Tuple[float, float]


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Round to the nearest integer with halves going up, as integers."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5).astype(np.int64)


@dataclass
class Trajectory:
    """One tracked point.

    Attributes:
        start_frame: Frame index of the first position
        points: float32 array of shape (n, 4) with rows (x, y, dx, dy), n >= 2
        level: Spatial scale the point was tracked at (0 is full resolution)
    """

    start_frame: int
    points: np.ndarray
    level: int = 0

    def __post_init__(self) -> None:
        points = np.ascontiguousarray(self.points, dtype=np.float32)
        if points.ndim != 2 or points.shape[1] != 4:
            raise ShapeError(f"trajectory points must have shape (n, 4), got {points.shape}")
        if points.shape[0] < 2:
            raise ShapeError(f"trajectory needs at least 2 positions, got {points.shape[0]}")
        if self.start_frame < 0:
            raise ValueError(f"start_frame must be >= 0, got {self.start_frame}")
        ensure_finite_array(points, "trajectory")
        self.points = points

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def positions(self) -> np.ndarray:
        """(n, 2) absolute coordinates."""
        return self.points[:, :2]

    @property
    def deltas(self) -> np.ndarray:
        """(n, 2) per-row displacements, including the trailing one."""
        return self.points[:, 2:]

    @property
    def steps(self) -> np.ndarray:
        """(n - 1, 2) displacements actually taken between positions."""
        return self.points[:-1, 2:]

    @property
    def end_frame(self) -> int:
        return self.start_frame + len(self) - 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.start_frame == other.start_frame and np.array_equal(self.points, other.points)


@dataclass
class TrajectorySet:
    """All trajectories of one video.

    Attributes:
        trajectories: Trajectories ordered by start frame
        frame_size: (H, W) of the video
    """

    trajectories: List[Trajectory]
    frame_size: Tuple[int, int]

    def __post_init__(self) -> None:
        height, width = self.frame_size
        for index, traj in enumerate(self.trajectories):
            xs, ys = traj.points[:, 0], traj.points[:, 1]
            if xs.min() < 0 or ys.min() < 0 or xs.max() > width - 1 or ys.max() > height - 1:
                raise ShapeError(
                    f"trajectory {index} leaves the {width}x{height} frame"
                )

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    def __getitem__(self, index: int) -> Trajectory:
        return self.trajectories[index]

    @property
    def total_points(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def grouped_by_start(self) -> List[Tuple[int, List[Trajectory]]]:
        """Group trajectories by start frame, ascending, keeping stored order."""
        groups: Dict[int, List[Trajectory]] = {}
        for traj in self.trajectories:
            groups.setdefault(traj.start_frame, []).append(traj)
        return sorted(groups.items())


def sample_points(
    occupied: np.ndarray,
    frame_size: Tuple[int, int],
    grid_step: int,
    min_coverage_dist: Optional[float] = None,
) -> List[Tuple[int, int]]:
    """Grid points not covered by an occupied pixel.

    Grid points are ``(i * W + W // 2, j * W + W // 2)`` inside the frame. A
    point is excluded when some occupied pixel lies at Chebyshev distance
    below ``min_coverage_dist`` (default ``W / 2``).

    Args:
        occupied: Boolean (H, W) mask of pixels held by active tracks
        frame_size: (H, W)
        grid_step: Grid step W
        min_coverage_dist: Exclusion radius in pixels

    Returns:
        Points as (x, y), row-major
    """
    height, width = frame_size
    if grid_step < 1:
        raise ValueError(f"grid_step must be >= 1, got {grid_step}")
    dist = grid_step / 2.0 if min_coverage_dist is None else min_coverage_dist
    offset = grid_step // 2
    xs = np.arange(offset, width, grid_step)
    ys = np.arange(offset, height, grid_step)
    if not np.any(occupied):
        return [(int(x), int(y)) for y in ys for x in xs]
    radius = max(0, math.ceil(dist) - 1)
    covered = ndimage.maximum_filter(
        occupied.astype(np.uint8), size=2 * radius + 1, mode="constant", cval=0
    ).astype(bool)
    return [(int(x), int(y)) for y in ys for x in xs if not covered[y, x]]


def median_flow(flow: FlowField, kernel: int) -> Tuple[np.ndarray, np.ndarray]:
    """Componentwise kernel x kernel median of a flow field, borders replicated."""
    mu = ndimage.median_filter(flow.u, size=kernel, mode="nearest")
    mv = ndimage.median_filter(flow.v, size=kernel, mode="nearest")
    return mu, mv


def step_displacement(p: Position, flow: FlowField, kernel: int) -> Tuple[np.float32, np.float32]:
    """Median-filtered flow at the rounded position ``p``."""
    xi, yi = (int(v) for v in round_half_up(np.array(p)))
    half = kernel // 2
    rows = np.clip(np.arange(yi - half, yi + half + 1), 0, flow.height - 1)
    cols = np.clip(np.arange(xi - half, xi + half + 1), 0, flow.width - 1)
    window = np.ix_(rows, cols)
    return np.float32(np.median(flow.u[window])), np.float32(np.median(flow.v[window]))


def track_step(p: Position, flow: FlowField, kernel: int) -> Tuple[float, float]:
    """Advance a point by one frame.

    Args:
        p: Position (x, y) inside the frame
        flow: Flow from the current frame to the next
        kernel: Odd median kernel size

    Returns:
        New position, float32-accumulated
    """
    dx, dy = step_displacement(p, flow, kernel)
    return float(np.float32(p[0]) + dx), float(np.float32(p[1]) + dy)


def prune(traj: Trajectory, config: TrajectoryConfig) -> bool:
    """Decide whether a finished trajectory is kept.

    Only the steps taken between stored positions count: their mean must
    reach ``min_mean_step`` and none may exceed ``max_step``. The trailing
    row's displacement is not a step and is ignored.
    """
    steps = np.hypot(traj.steps[:, 0].astype(np.float64), traj.steps[:, 1])
    if steps.size == 0:
        return False
    return bool(steps.mean() >= config.min_mean_step and steps.max() <= config.max_step)


def normalize_displacements(traj: Trajectory) -> np.ndarray:
    """Flatten the taken steps, divided by the sum of their magnitudes.

    Raises:
        DataError: If the trajectory never moved
    """
    steps = traj.steps.astype(np.float64)
    total = float(np.sum(np.hypot(steps[:, 0], steps[:, 1])))
    if total <= 0.0:
        raise DataError("cannot normalize a trajectory with zero total displacement")
    return (steps / total).reshape(-1)


@dataclass
class _Track:
    start_frame: int
    xs: List[np.float32] = field(default_factory=list)
    ys: List[np.float32] = field(default_factory=list)
    dxs: List[np.float32] = field(default_factory=list)
    dys: List[np.float32] = field(default_factory=list)

    def finish(self, dx: float, dy: float, level: int) -> Optional[Trajectory]:
        if len(self.xs) < 2:
            return None
        points = np.column_stack(
            [self.xs, self.ys, self.dxs + [np.float32(dx)], self.dys + [np.float32(dy)]]
        ).astype(np.float32)
        return Trajectory(self.start_frame, points, level)


def _scaled_flows(
    flows: Sequence[FlowField], factor: float, kernel: int
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Median-filtered flows at one pyramid level, in original-resolution pixels."""
    height, width = flows[0].shape
    if factor == 1.0:
        return [median_flow(flow, kernel) for flow in flows]
    size = (max(1, int(round(width * factor))), max(1, int(round(height * factor))))
    scaled = []
    for flow in flows:
        small = FlowField(resize_bilinear(flow.u, size) * factor, resize_bilinear(flow.v, size) * factor)
        mu, mv = median_flow(small, kernel)
        scaled.append(((mu / factor).astype(np.float32), (mv / factor).astype(np.float32)))
    return scaled


def _track_level(
    flows: Sequence[FlowField], config: TrajectoryConfig, level: int
) -> List[Trajectory]:
    height, width = flows[0].shape
    factor = config.scale_factor ** level
    medians = _scaled_flows(flows, factor, config.median_kernel)
    level_h, level_w = medians[0][0].shape
    emitted: List[Trajectory] = []
    active: List[_Track] = []

    def seed(frame: int) -> None:
        occupied = np.zeros((level_h, level_w), dtype=bool)
        for track in active:
            cx = int(np.clip(round_half_up(track.xs[-1] * factor), 0, level_w - 1))
            cy = int(np.clip(round_half_up(track.ys[-1] * factor), 0, level_h - 1))
            occupied[cy, cx] = True
        for gx, gy in sample_points(
            occupied, (level_h, level_w), config.grid_step, config.min_coverage_dist
        ):
            x, y = np.float32(gx / factor), np.float32(gy / factor)
            if x <= width - 1 and y <= height - 1:
                active.append(_Track(frame, [x], [y]))

    def close(track: _Track, dx: float, dy: float) -> None:
        traj = track.finish(dx, dy, level)
        if traj is not None and prune(traj, config):
            emitted.append(traj)

    seed(0)
    for t, (mu, mv) in enumerate(medians):
        survivors: List[_Track] = []
        for track in active:
            x, y = track.xs[-1], track.ys[-1]
            lx = int(np.clip(round_half_up(x * factor), 0, level_w - 1))
            ly = int(np.clip(round_half_up(y * factor), 0, level_h - 1))
            dx, dy = mu[ly, lx], mv[ly, lx]
            if math.hypot(dx, dy) > config.max_step:
                close(track, 0.0, 0.0)
                continue
            if len(track.dxs) >= config.max_length:
                close(track, dx, dy)
                continue
            nx, ny = np.float32(x + dx), np.float32(y + dy)
            if not (0.0 <= nx <= width - 1 and 0.0 <= ny <= height - 1):
                close(track, 0.0, 0.0)
                continue
            track.dxs.append(dx)
            track.dys.append(dy)
            track.xs.append(nx)
            track.ys.append(ny)
            survivors.append(track)
        active = survivors
        if t + 1 < len(medians):
            seed(t + 1)
    for track in active:
        close(track, 0.0, 0.0)
    return emitted


def extract_trajectories(
    flows: Sequence[FlowField], config: Optional[TrajectoryConfig] = None
) -> TrajectorySet:
    """Track grid points through a video's flow fields.

    Tracks end after ``max_length`` displacements, when they would leave the
    frame, when the pending step exceeds ``max_step``, or at the last flow.
    A track stopped by an oversized step keeps the steps it took before it.
    Finished tracks pass through :func:`prune`. After each frame new points
    are seeded on grid cells not covered by active tracks.

    Args:
        flows: Flow fields of consecutive frame pairs (camera-compensated
            when compensation is enabled)
        config: Extraction settings

    Returns:
        TrajectorySet ordered by start frame

    Raises:
        DataError: If ``flows`` is empty
        ShapeError: If the flow fields differ in size
    """
    config = config or TrajectoryConfig()
    if not flows:
        raise DataError("trajectory extraction needs at least one flow field")
    shape = flows[0].shape
    for index, flow in enumerate(flows):
        if flow.shape != shape:
            raise ShapeError(f"flow {index} has size {flow.shape}, expected {shape}")

    collected: List[Trajectory] = []
    for level in range(config.scales):
        collected.extend(_track_level(flows, config, level))
    collected.sort(key=lambda traj: traj.start_frame)
    logger.info("extracted %d trajectories from %d flow fields", len(collected), len(flows))
    return TrajectorySet(collected, shape)


def replay_step(traj: Trajectory, index: int, flow: FlowField, kernel: int) -> Tuple[np.float32, np.float32]:
    """Recompute the displacement stored at ``traj.points[index]`` from a flow field."""
    x, y = traj.points[index, 0], traj.points[index, 1]
    return step_displacement((float(x), float(y)), flow, kernel)
