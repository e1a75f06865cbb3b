"""Per-video stage orchestration with on-disk caching.

Artifacts of one video live under ``<work_dir>/<video key>/``::

    flow/raw_00000.flo        optical flow per frame pair
    flow/comp_00000.flo       camera-compensated flow
    trajectories.sdtd         dense trajectories
    tti/                      texture sequence (sidecar, raw dump, PNGs)
    report.json               counts, warnings and the stage keys

A stage is recomputed when its key (a hash of the config sections it
depends on) differs from the one recorded in ``report.json``.
"""

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from sdtd.egomotion import compensate_sequence
from sdtd.flow import FlowField, compute_flows, make_solver
from sdtd.frames import FrameSequence
from sdtd.models.configs import StreamKind
from sdtd.models.pipeline import PipelineConfig, resolve_data_path
from sdtd.serialization import load_json, save_json
from sdtd.streams.inputs import build_temporal_input, input_scale
from sdtd.texture import TtiSequence, build_sequence_from_config
from sdtd.trajectories import TrajectorySet, extract_trajectories
from sdtd.videoio import (
    DatasetManifest,
    ManifestEntry,
    load_frame_sequence,
    load_tti_sequence,
    manifest_video_path,
    read_flo,
    read_manifest,
    read_trajectories,
    save_tti_sequence,
    write_flo,
    write_trajectories,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

STAGES = ("flow", "compensate", "trajectories", "tti")
STAGE_SECTIONS = {
    "flow": ("flow",),
    "compensate": ("flow", "egomotion"),
    "trajectories": ("flow", "egomotion", "trajectory"),
    "tti": ("flow", "egomotion", "trajectory", "tti"),
}
REPORT_NAME = "report.json"


def stage_key(config: PipelineConfig, stage: str) -> str:
    """Hash of the config sections a stage depends on."""
    data = config.to_dict()
    relevant = {section: data[section] for section in STAGE_SECTIONS[stage]}
    return hashlib.sha256(json.dumps(relevant, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def video_key(entry_path: str) -> str:
    """Directory name for a video's artifacts."""
    return entry_path.strip("/").replace("/", "__")


@dataclass
class VideoReport:
    """What processing one video produced.

    Attributes:
        video: Frame directory
        artifacts: Artifact directory
        frames: Frame count
        trajectories: Trajectory count
        tti_images: Texture images emitted
        warnings: Camera-motion pairs that passed through uncompensated
        stage_keys: Key of every completed stage
        recomputed: Stages computed in this run (the rest came from cache)
    """

    video: str
    artifacts: str
    frames: int = 0
    trajectories: int = 0
    tti_images: int = 0
    warnings: List[str] = field(default_factory=list)
    stage_keys: Dict[str, str] = field(default_factory=dict)
    recomputed: List[str] = field(default_factory=list)


def _flow_paths(directory: Path, prefix: str, count: int) -> List[Path]:
    return [directory / "flow" / f"{prefix}_{i:05d}.flo" for i in range(count)]


def _load_flows(paths: Sequence[Path]) -> Optional[List[FlowField]]:
    if not paths or not all(p.is_file() for p in paths):
        return None
    return [read_flo(p) for p in paths]


def _previous_report(directory: Path) -> Dict:
    path = directory / REPORT_NAME
    return load_json(path) if path.is_file() else {}


def process_video(
    video: PathLike,
    artifacts: PathLike,
    config: Optional[PipelineConfig] = None,
    stages: Sequence[str] = STAGES,
    force: bool = False,
) -> VideoReport:
    """Run flow, compensation, trajectory and texture stages for one video.

    Cached artifacts whose stage key matches are reused unless ``force``.

    Args:
        video: Frame directory or list file
        artifacts: Artifact directory of this video
        config: Pipeline configuration
        stages: Stages to bring up to date; prerequisites run as needed
        force: Recompute every requested stage

    Returns:
        VideoReport, also written to ``report.json``

    Raises:
        DataError: On missing or inconsistent frames
    """
    config = config or PipelineConfig()
    directory = Path(artifacts)
    directory.mkdir(parents=True, exist_ok=True)
    previous = {} if force else _previous_report(directory).get("stage_keys", {})
    wanted = STAGES[: max(STAGES.index(s) for s in stages) + 1]
    sequence: FrameSequence = load_frame_sequence(video)
    sequence.id = str(video)
    report = VideoReport(str(video), str(directory), frames=len(sequence))
    pairs = len(sequence) - 1
    solver = make_solver(config.flow)

    def fresh(stage: str) -> bool:
        return previous.get(stage) == stage_key(config, stage)

    raw = _load_flows(_flow_paths(directory, "raw", pairs)) if fresh("flow") else None
    if raw is None:
        raw = compute_flows(sequence, solver)
        for flow, path in zip(raw, _flow_paths(directory, "raw", pairs)):
            write_flo(flow, path)
        report.recomputed.append("flow")
    report.stage_keys["flow"] = stage_key(config, "flow")

    trajectories: Optional[TrajectorySet] = None
    if "compensate" in wanted:
        compensated = _load_flows(_flow_paths(directory, "comp", pairs)) if fresh("compensate") else None
        if compensated is None:
            result = compensate_sequence(sequence, raw, config.egomotion, solver)
            compensated = result.flows
            report.warnings.extend(result.warnings)
            for flow, path in zip(compensated, _flow_paths(directory, "comp", pairs)):
                write_flo(flow, path)
            report.recomputed.append("compensate")
        else:
            report.warnings.extend(_previous_report(directory).get("warnings", []))
        report.stage_keys["compensate"] = stage_key(config, "compensate")

        if "trajectories" in wanted:
            path = directory / "trajectories.sdtd"
            if fresh("trajectories") and path.is_file():
                trajectories = read_trajectories(path)
            else:
                trajectories = extract_trajectories(compensated, config.trajectory)
                write_trajectories(trajectories, path)
                report.recomputed.append("trajectories")
            report.trajectories = len(trajectories)
            report.stage_keys["trajectories"] = stage_key(config, "trajectories")

    if "tti" in wanted and trajectories is not None:
        tti_dir = directory / "tti"
        if fresh("tti") and (tti_dir / "tti.json").is_file():
            sequence_tti = load_tti_sequence(tti_dir)
        else:
            sequence_tti = build_sequence_from_config(trajectories, config.tti)
            save_tti_sequence(sequence_tti, tti_dir, config.tti.bound, config.tti.export_png)
            report.recomputed.append("tti")
        report.tti_images = len(sequence_tti)
        report.stage_keys["tti"] = stage_key(config, "tti")

    save_json(report, directory / REPORT_NAME)
    logger.info(
        "%s: %d frames, %d trajectories, %d texture images (recomputed %s)",
        video,
        report.frames,
        report.trajectories,
        report.tti_images,
        ",".join(report.recomputed) or "nothing",
    )
    return report


def _process_job(job: Tuple[str, str, PipelineConfig, Tuple[str, ...], bool]) -> VideoReport:
    video, artifacts, config, stages, force = job
    return process_video(video, artifacts, config, stages, force)


def process_manifest(
    manifest_path: PathLike,
    config: Optional[PipelineConfig] = None,
    stages: Sequence[str] = STAGES,
    force: bool = False,
) -> List[VideoReport]:
    """Process every video of a manifest, ``config.jobs`` at a time.

    Reports come back in manifest order whatever the worker count.
    """
    config = config or PipelineConfig()
    manifest = read_manifest(manifest_path)
    work_dir = resolve_data_path(config.work_dir)
    jobs = [
        (
            str(manifest_video_path(manifest_path, entry)),
            str(work_dir / video_key(entry.path)),
            config,
            tuple(stages),
            force,
        )
        for entry in manifest.entries
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(_process_job, jobs))
    return [_process_job(job) for job in jobs]


def load_stream_items(
    video: PathLike,
    artifacts: PathLike,
    kind: StreamKind,
    config: Optional[PipelineConfig] = None,
) -> List[np.ndarray]:
    """Ordered (H, W, C) network inputs of one stream for one video.

    Spatial items are the RGB frames, temporal items the raw flow images
    and sdtd items the texture images; the latter two are divided by the
    texture bound.
    """
    config = config or PipelineConfig()
    kind = StreamKind(kind)
    scale = input_scale(kind, config.tti.bound)
    if kind == StreamKind.SPATIAL:
        return [frame.data.astype(np.float32) for frame in load_frame_sequence(video)]
    directory = Path(artifacts)
    if kind == StreamKind.TEMPORAL:
        paths = sorted((directory / "flow").glob("raw_*.flo"))
        return [(build_temporal_input(read_flo(p)).data * scale).astype(np.float32) for p in paths]
    tti: TtiSequence = load_tti_sequence(directory / "tti")
    if not tti.images:
        # motionless video: one blank canvas keeps the stream defined
        height, width = load_frame_sequence(video).size
        return [np.zeros((height, width, config.tti.channels), dtype=np.float32)]
    return [(image * scale).astype(np.float32) for image in tti.images]


def make_loader(
    manifest_path: PathLike,
    config: Optional[PipelineConfig] = None,
    transform: Optional[Callable[[ManifestEntry, StreamKind, List[np.ndarray]], List[np.ndarray]]] = None,
) -> Callable[[ManifestEntry, StreamKind], List[np.ndarray]]:
    """Item loader over a processed manifest, memoized per (video, stream).

    Args:
        manifest_path: Manifest the entries come from
        config: Pipeline configuration (locates ``work_dir``)
        transform: Optional rewrite of loaded items, such as shuffling
    """
    config = config or PipelineConfig()
    work_dir = resolve_data_path(config.work_dir)
    cache: Dict[Tuple[str, str], List[np.ndarray]] = {}

    def load(entry: ManifestEntry, kind: StreamKind) -> List[np.ndarray]:
        key = (entry.path, StreamKind(kind).value)
        if key not in cache:
            items = load_stream_items(
                manifest_video_path(manifest_path, entry), work_dir / video_key(entry.path), kind, config
            )
            cache[key] = transform(entry, StreamKind(kind), items) if transform else items
        return cache[key]

    return load


def manifest_and_loader(
    manifest_path: PathLike, config: Optional[PipelineConfig] = None
) -> Tuple[DatasetManifest, Callable[[ManifestEntry, StreamKind], List[np.ndarray]]]:
    """Process a manifest's videos (reusing cache) and return it with a loader."""
    config = config or PipelineConfig()
    process_manifest(manifest_path, config)
    return read_manifest(manifest_path), make_loader(manifest_path, config)
