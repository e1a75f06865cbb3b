"""Synthetic videos whose classes differ only in long-term motion.

A textured square sprite moves over a textured background. Every class
moves the sprite by exactly ``speed`` pixels per frame on average, so
frame-to-frame flow statistics cannot tell the classes apart; only the
path shape and its temporal structure can:

- linear: constant velocity along x, reflecting at the frame margins
- circular: constant speed around the frame center
- zigzag: velocity (0.6, +-0.8) * speed, turning vertically every period
- stop_and_go: moves along x during the first ``duty`` of each period and
  rests for the remainder, with the moving speed raised to keep the mean

linear and stop_and_go trace the same row and differ only in timing. A
:class:`Placement` translates a path and shifts its start phase; datasets draw
one per video so the sprite position carries no class information.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import ndimage

from sdtd.flow import FlowField
from sdtd.frames import Frame, FrameSequence
from sdtd.models.configs import DatasetSpec, MotionClass, MotionKind, SceneSpec
from sdtd.models.exceptions import ConfigError
from sdtd.videoio import DatasetManifest, ManifestEntry, write_frames, write_manifest

logger = logging.getLogger(__name__)

MARGIN = 1.0
ZIGZAG_DIRECTION = (0.6, 0.8)
PLACEMENT_INSET = 1e-6
VIDEO_SEED_STRIDE = 100_000
MANIFEST_NAME = "manifest.tsv"


def _fold(travel: np.ndarray, length: float) -> np.ndarray:
    """Reflect a distance travelled into [0, length] (ping-pong)."""
    phase = np.mod(travel, 2.0 * length)
    return np.where(phase <= length, phase, 2.0 * length - phase)


def _fit_length(available: float, step: float) -> float:
    """Longest multiple of ``step`` not above ``available``, so turns land on frames."""
    return step * math.floor(available / step + 1e-9)


@dataclass(frozen=True)
class Placement:
    """Translation (dx, dy) in pixels and start phase in frames applied to a class path."""

    dx: float = 0.0
    dy: float = 0.0
    phase: int = 0


def center_path(
    motion: MotionClass, scene: SceneSpec, placement: Optional[Placement] = None
) -> np.ndarray:
    """Sprite center (x, y) for every frame.

    Args:
        motion: Motion class
        scene: Scene layout
        placement: Translation and phase; the canonical path when omitted

    Returns:
        (frames, 2) float64 array

    Raises:
        ConfigError: If the path would take the sprite outside the frame
    """
    placement = placement or Placement()
    frames = np.arange(scene.frames, dtype=np.float64) + placement.phase
    half = scene.sprite_size / 2.0
    lo = half + MARGIN
    available = scene.width - 2.0 * lo
    cx, cy = (scene.width - 1) / 2.0, (scene.height - 1) / 2.0
    kind = MotionKind(motion.name)
    speed = motion.speed

    if kind == MotionKind.LINEAR:
        length = _fit_length(available, speed)
        path = np.stack([lo + _fold(speed * frames, length), np.full_like(frames, cy)], axis=1)
    elif kind == MotionKind.CIRCULAR:
        if speed >= 2.0 * motion.radius:
            raise ConfigError(f"speed {speed} too large for orbit radius {motion.radius}")
        omega = 2.0 * math.asin(speed / (2.0 * motion.radius))
        path = np.stack(
            [cx + motion.radius * np.cos(omega * frames), cy + motion.radius * np.sin(omega * frames)],
            axis=1,
        )
    elif kind == MotionKind.ZIGZAG:
        vx, vy = ZIGZAG_DIRECTION[0] * speed, ZIGZAG_DIRECTION[1] * speed
        length = _fit_length(available, vx)
        ys = cy + _fold(vy * frames, vy * motion.period)
        path = np.stack([lo + _fold(vx * frames, length), ys], axis=1)
    else:
        moving = max(1, int(round(motion.duty * motion.period)))
        fast = speed * motion.period / moving
        cycles, within = np.divmod(frames, motion.period)
        travel = fast * (cycles * moving + np.minimum(within, moving))
        length = _fit_length(available, fast)
        path = np.stack([lo + _fold(travel, length), np.full_like(frames, cy)], axis=1)
    path = path + (placement.dx, placement.dy)

    if (
        path[:, 0].min() - half < 0
        or path[:, 1].min() - half < 0
        or path[:, 0].max() + half > scene.width - 1
        or path[:, 1].max() + half > scene.height - 1
    ):
        raise ConfigError(f"{kind.value} path exits the {scene.width}x{scene.height} frame")
    return path


def noise_texture(shape: Tuple[int, int], sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Band-limited noise in [0, 1], periodic in both axes."""
    noise = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    noise = (noise - noise.mean()) / (noise.std() + 1e-12)
    return np.clip(0.5 + 0.18 * noise, 0.0, 1.0)


def _tinted(texture: np.ndarray, tint: np.ndarray) -> np.ndarray:
    return np.clip(texture[:, :, np.newaxis] * tint[np.newaxis, np.newaxis, :], 0.0, 1.0)


def sprite_mask(center: Tuple[float, float], scene: SceneSpec) -> np.ndarray:
    """Pixels covered by the sprite square ``[c - s/2, c + s/2)`` in both axes."""
    sx, sy = _sprite_coords(center, scene)
    size = scene.sprite_size
    return (sx >= -0.5) & (sx < size - 0.5) & (sy >= -0.5) & (sy < size - 0.5)


def _sprite_coords(center: Tuple[float, float], scene: SceneSpec) -> Tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0 : scene.height, 0 : scene.width].astype(np.float64)
    offset = scene.sprite_size / 2.0 - 0.5
    return xs - (center[0] - offset), ys - (center[1] - offset)


def render_frame(
    center: Tuple[float, float],
    t: int,
    scene: SceneSpec,
    background: np.ndarray,
    sprite: np.ndarray,
) -> Frame:
    """Composite the sprite over the panned background at frame ``t``."""
    ys, xs = np.mgrid[0 : scene.height, 0 : scene.width].astype(np.float64)
    pan_x, pan_y = scene.camera_pan
    coords = np.array([ys - pan_y * t, xs - pan_x * t])
    image = np.stack(
        [ndimage.map_coordinates(background[:, :, c], coords, order=1, mode="grid-wrap") for c in range(3)],
        axis=-1,
    )
    mask = sprite_mask(center, scene)
    sx, sy = _sprite_coords(center, scene)
    sprite_coords = np.array([sy[mask], sx[mask]])
    for c in range(3):
        image[:, :, c][mask] = ndimage.map_coordinates(sprite[:, :, c], sprite_coords, order=1, mode="nearest")
    return Frame(image)


def render_path(path: np.ndarray, scene: SceneSpec, seed: int) -> FrameSequence:
    """Render a sprite following ``path`` with textures drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    background = _tinted(
        noise_texture((scene.height, scene.width), scene.texture_sigma, rng), rng.uniform(0.6, 1.0, 3)
    )
    sprite = _tinted(
        noise_texture((scene.sprite_size, scene.sprite_size), scene.texture_sigma, rng),
        rng.uniform(0.8, 1.6, 3),
    )
    frames = [render_frame(tuple(path[t]), t, scene, background, sprite) for t in range(len(path))]
    return FrameSequence(frames)


def random_placement(motion: MotionClass, scene: SceneSpec, rng: np.random.Generator) -> Placement:
    """Draw a start phase and a translation that keeps the sprite inside the frame.

    The phase is uniform over ``[0, frames)``. Each offset is uniform over the
    range the phased path leaves free on that axis; an axis with no room stays
    centered in it.
    """
    phase = int(rng.integers(0, scene.frames))
    path = center_path(motion, scene, Placement(phase=phase))
    half = scene.sprite_size / 2.0
    offsets = []
    for axis, extent in ((0, scene.width), (1, scene.height)):
        low = half - path[:, axis].min() + PLACEMENT_INSET
        high = extent - 1 - half - path[:, axis].max() - PLACEMENT_INSET
        offsets.append(float(rng.uniform(low, high)) if high > low else (low + high) / 2.0)
    return Placement(dx=offsets[0], dy=offsets[1], phase=phase)


def generate_video(
    motion: MotionClass, scene: SceneSpec, seed: int, placement: Optional[Placement] = None
) -> Tuple[FrameSequence, str]:
    """Render one video of a motion class.

    Args:
        motion: Motion class
        scene: Scene layout
        seed: Texture seed; the path does not depend on it
        placement: Translation and phase of the path

    Returns:
        Frames and the class name

    Raises:
        ConfigError: If the path exits the frame
    """
    sequence = render_path(center_path(motion, scene, placement), scene, seed)
    return sequence, MotionKind(motion.name).value


def flow_for_path(path: np.ndarray, scene: SceneSpec, t: int) -> FlowField:
    """Analytic flow from frame t to t+1 of a rendered path."""
    if not 0 <= t < len(path) - 1:
        raise ValueError(f"t must be in [0, {len(path) - 1}), got {t}")
    u = np.full((scene.height, scene.width), scene.camera_pan[0])
    v = np.full((scene.height, scene.width), scene.camera_pan[1])
    mask = sprite_mask(tuple(path[t]), scene)
    du, dv = path[t + 1] - path[t]
    u[mask] = du
    v[mask] = dv
    return FlowField(u, v)


def ground_truth_flow(
    motion: MotionClass, scene: SceneSpec, t: int, placement: Optional[Placement] = None
) -> FlowField:
    """Path derivative on sprite pixels, camera pan elsewhere."""
    return flow_for_path(center_path(motion, scene, placement), scene, t)


def video_seed(seed: int, index: int) -> int:
    """Texture seed of the ``index``-th video of a dataset; distinct per (seed, index)."""
    return seed * VIDEO_SEED_STRIDE + index


VideoJob = Tuple[MotionClass, SceneSpec, int, Optional[Placement], str]


def _write_video(job: VideoJob) -> str:
    motion, scene, seed, placement, directory = job
    sequence, _ = generate_video(motion, scene, seed, placement)
    write_frames(sequence, directory)
    return directory


def generate_dataset(
    spec: DatasetSpec,
    out_dir: Union[str, Path],
    seed: int = 0,
    jobs: int = 1,
) -> Tuple[DatasetManifest, Path]:
    """Write a balanced dataset of PNG frame directories and its manifest.

    Layout: ``<out_dir>/<split>/<class>_<nnn>/frame_00000.png`` and
    ``<out_dir>/manifest.tsv`` with paths relative to the manifest.

    Args:
        spec: Classes, counts and scene
        out_dir: Output directory
        seed: Dataset seed
        jobs: Worker processes

    Returns:
        Manifest and manifest path
    """
    out_dir = Path(out_dir)
    class_names = [MotionKind(kind).value for kind in spec.classes]
    entries: List[ManifestEntry] = []
    work: List[VideoJob] = []
    index = 0
    for split, count in (("train", spec.per_class_train), ("test", spec.per_class_test)):
        for label, name in enumerate(class_names):
            motion = MotionClass(name=MotionKind(name), speed=spec.speed)
            for number in range(count):
                relative = f"{split}/{name}_{number:03d}"
                entries.append(ManifestEntry(relative, label, split))
                texture_seed = video_seed(seed, index)
                placement = None
                if spec.random_placement:
                    placement = random_placement(motion, spec.scene, np.random.default_rng([texture_seed, 1]))
                work.append((motion, spec.scene, texture_seed, placement, str(out_dir / relative)))
                index += 1
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_write_video, work))
    else:
        for job in work:
            _write_video(job)
    manifest = DatasetManifest(entries, class_names)
    path = write_manifest(manifest, out_dir / MANIFEST_NAME)
    logger.info("generated %d videos in %s", len(entries), out_dir)
    return manifest, path


def path_separation(
    a: np.ndarray, b: np.ndarray, diagonal: Optional[float] = None, aligned: bool = False
) -> float:
    """Distance between two center paths, optionally per diagonal.

    The default is the symmetric Hausdorff distance between the traced point
    sets. With ``aligned`` the paths are compared frame by frame instead, which
    separates paths that trace the same points on a different schedule.
    """
    if aligned:
        if a.shape != b.shape:
            raise ValueError(f"aligned paths need equal shapes, got {a.shape} and {b.shape}")
        value = float(np.hypot(*(a - b).T).max())
    else:
        distances = np.hypot(
            a[:, np.newaxis, 0] - b[np.newaxis, :, 0], a[:, np.newaxis, 1] - b[np.newaxis, :, 1]
        )
        value = float(max(distances.min(axis=1).max(), distances.min(axis=0).max()))
    return value / diagonal if diagonal else value
