"""On-disk artifacts: frames, flow fields, trajectories, texture images,
network checkpoints and dataset manifests.

Binary formats are little-endian and start with a magic tag:

- ``.flo``: float32 202021.25, int32 width, int32 height, then H*W
  interleaved float32 (u, v) pairs, row-major
- trajectories: ``b"SDTD"``, uint32 version, uint16 height, uint16 width,
  uint32 count, then per trajectory uint32 start frame, uint32 length and
  ``length`` float32 rows (x, y, dx, dy)
- checkpoints: ``b"SDCK"``, uint32 version, uint32 count, then per tensor
  uint32 name length, UTF-8 name, uint32 rank, uint32 dims, float32 data
"""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from sdtd.flow import FlowField
from sdtd.frames import Frame, FrameSequence
from sdtd.models.exceptions import DataError, FormatError, ShapeError
from sdtd.models.pipeline import resolve_data_path
from sdtd.models.validators import ensure_finite_array
from sdtd.serialization import load_json, save_json
from sdtd.texture import TtiSequence, export_tti_png
from sdtd.trajectories import Trajectory, TrajectorySet

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLO_MAGIC = np.float32(202021.25)
TRAJECTORY_MAGIC = b"SDTD"
TRAJECTORY_VERSION = 1
CHECKPOINT_MAGIC = b"SDCK"
CHECKPOINT_VERSION = 1
IMAGE_SUFFIXES = (".png", ".pgm", ".ppm")
SPLITS = ("train", "test")


# ---------------------------------------------------------------- frames


def _read_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as image:
            image.load()
            mode = image.mode
            if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise DataError(f"{path.name}: unsupported bit depth (mode {mode}, max 8 bits)")
            if mode in ("1", "L", "LA"):
                array = np.asarray(image.convert("L"), dtype=np.float64)[:, :, np.newaxis]
            else:
                array = np.asarray(image.convert("RGB"), dtype=np.float64)
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"{path.name}: cannot read image ({exc})") from exc
    return array / 255.0


def list_frame_files(path: PathLike) -> List[Path]:
    """Resolve a frame directory or list file to ordered image paths.

    A directory yields its image files in lexicographic order; a list file
    names one image per line, relative to the list file's directory.

    Raises:
        DataError: If the path does not exist
    """
    path = resolve_data_path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if path.is_file():
        lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
        return [path.parent / line for line in lines if line and not line.startswith("#")]
    raise DataError(f"missing path: {path}")


def load_frame_sequence(path: PathLike, fps: float = 25.0) -> FrameSequence:
    """Load a video stored as individual PNG/PGM images.

    Args:
        path: Directory of frames or a text file listing them
        fps: Frame rate recorded as metadata

    Returns:
        FrameSequence with values scaled to [0, 1]

    Raises:
        DataError: On a missing path, no frames, mixed dimensions or
            unsupported bit depth; messages name the offending file
    """
    files = list_frame_files(path)
    if not files:
        raise DataError(f"no frames in {path}")
    frames: List[Frame] = []
    for file in files:
        if not file.is_file():
            raise DataError(f"missing frame file: {file}")
        frame = Frame(_read_image(file))
        if frames and frame.shape != frames[0].shape:
            raise DataError(
                f"{file.name}: frame shape {frame.shape} differs from {frames[0].shape}"
            )
        frames.append(frame)
    logger.debug("loaded %d frames from %s", len(frames), path)
    return FrameSequence(frames, fps=fps, id=Path(path).name, names=[f.name for f in files])


def quantize(data: np.ndarray) -> np.ndarray:
    """Map [0, 1] floats to uint8 with rounding."""
    return np.clip(np.rint(np.asarray(data) * 255.0), 0, 255).astype(np.uint8)


def write_image(array: np.ndarray, path: PathLike) -> Path:
    """Write a uint8 (H, W), (H, W, 1) or (H, W, 3) array as PNG/PGM/PPM."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    array = np.asarray(array, dtype=np.uint8)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[:, :, 0]
    Image.fromarray(array).save(path)
    return path


def write_frames(sequence: FrameSequence, directory: PathLike, suffix: str = ".png") -> List[Path]:
    """Write every frame as an 8-bit image named ``frame_00000.png`` and so on.

    Grayscale frames written with ``suffix=".pgm"`` become PGM files.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [
        write_image(quantize(frame.data), directory / f"frame_{index:05d}{suffix}")
        for index, frame in enumerate(sequence)
    ]


# ---------------------------------------------------------------- .flo


def write_flo(flow: FlowField, path: PathLike) -> Path:
    """Write a flow field in Middlebury ``.flo`` layout.

    Raises:
        NumericalError: If a component is NaN or Inf
    """
    ensure_finite_array(flow.u, "flow u")
    ensure_finite_array(flow.v, "flow v")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([FLO_MAGIC], dtype="<f4").tobytes()
    header += np.array([flow.width, flow.height], dtype="<i4").tobytes()
    path.write_bytes(header + flow.to_array().astype("<f4").tobytes())
    return path


def read_flo(path: PathLike) -> FlowField:
    """Read a Middlebury ``.flo`` file.

    Raises:
        DataError: If the file is missing
        FormatError: On a bad magic number or truncated data
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing flow file: {path}")
    raw = path.read_bytes()
    if len(raw) < 12:
        raise FormatError(f"{path.name}: truncated header")
    magic = np.frombuffer(raw, dtype="<f4", count=1)[0]
    if magic != FLO_MAGIC:
        raise FormatError(f"{path.name}: bad magic {magic!r}")
    width, height = (int(v) for v in np.frombuffer(raw, dtype="<i4", count=2, offset=4))
    if width < 0 or height < 0:
        raise FormatError(f"{path.name}: negative dimensions {width}x{height}")
    expected = 12 + 8 * width * height
    if len(raw) < expected:
        raise FormatError(f"{path.name}: truncated data ({len(raw)} of {expected} bytes)")
    data = np.frombuffer(raw, dtype="<f4", count=2 * width * height, offset=12)
    return FlowField.from_array(data.reshape(height, width, 2).astype(np.float32))


# ---------------------------------------------------------------- trajectories


class _Reader:
    """Sequential little-endian reader that reports truncation by file name."""

    def __init__(self, raw: bytes, name: str):
        self.raw = raw
        self.name = name
        self.offset = 0

    def take(self, fmt: str) -> Tuple:
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.raw):
            raise FormatError(f"{self.name}: truncated at byte {self.offset}")
        values = struct.unpack_from(fmt, self.raw, self.offset)
        self.offset += size
        return values

    def take_array(self, count: int) -> np.ndarray:
        size = 4 * count
        if self.offset + size > len(self.raw):
            raise FormatError(f"{self.name}: truncated at byte {self.offset}")
        array = np.frombuffer(self.raw, dtype="<f4", count=count, offset=self.offset)
        self.offset += size
        return array.astype(np.float32)

    def take_bytes(self, count: int) -> bytes:
        if self.offset + count > len(self.raw):
            raise FormatError(f"{self.name}: truncated at byte {self.offset}")
        chunk = self.raw[self.offset : self.offset + count]
        self.offset += count
        return chunk


def write_trajectories(trajectories: TrajectorySet, path: PathLike) -> Path:
    """Write a trajectory set in the ``SDTD`` binary layout."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = trajectories.frame_size
    chunks = [
        TRAJECTORY_MAGIC,
        struct.pack("<IHHI", TRAJECTORY_VERSION, height, width, len(trajectories)),
    ]
    for traj in trajectories:
        chunks.append(struct.pack("<II", traj.start_frame, len(traj)))
        chunks.append(traj.points.astype("<f4").tobytes())
    path.write_bytes(b"".join(chunks))
    return path


def read_trajectories(path: PathLike) -> TrajectorySet:
    """Read a trajectory set written by :func:`write_trajectories`.

    Raises:
        DataError: If the file is missing
        FormatError: On bad magic, version mismatch or truncation
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing trajectory file: {path}")
    reader = _Reader(path.read_bytes(), path.name)
    if reader.take_bytes(4) != TRAJECTORY_MAGIC:
        raise FormatError(f"{path.name}: bad magic")
    version, height, width, count = reader.take("<IHHI")
    if version != TRAJECTORY_VERSION:
        raise FormatError(f"{path.name}: version {version}, expected {TRAJECTORY_VERSION}")
    trajectories = []
    for _ in range(count):
        start, length = reader.take("<II")
        rows = reader.take_array(4 * length).reshape(length, 4)
        trajectories.append(Trajectory(start, rows))
    return TrajectorySet(trajectories, (height, width))


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(params: Mapping[str, np.ndarray], path: PathLike) -> Path:
    """Write named tensors as float32.

    Raises:
        NumericalError: If a tensor holds NaN or Inf
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chunks = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(params))]
    for name, tensor in params.items():
        tensor = np.asarray(tensor)
        ensure_finite_array(tensor, name)
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)) + encoded)
        chunks.append(struct.pack(f"<I{tensor.ndim}I", tensor.ndim, *tensor.shape))
        chunks.append(tensor.astype("<f4").tobytes())
    path.write_bytes(b"".join(chunks))
    return path


def load_checkpoint(
    path: PathLike, expected: Optional[Mapping[str, Tuple[int, ...]]] = None
) -> Dict[str, np.ndarray]:
    """Read named tensors written by :func:`save_checkpoint`.

    Args:
        path: Checkpoint file
        expected: Optional tensor shapes of the receiving model; every
            stored tensor must exist there with the same shape

    Returns:
        Mapping of tensor name to float32 array, in stored order

    Raises:
        FormatError: On bad magic, version mismatch or truncation
        ShapeError: On a tensor unknown to, or shaped differently from,
            ``expected``; the message names the tensor
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing checkpoint: {path}")
    reader = _Reader(path.read_bytes(), path.name)
    if reader.take_bytes(4) != CHECKPOINT_MAGIC:
        raise FormatError(f"{path.name}: bad magic")
    version, count = reader.take("<II")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path.name}: version {version}, expected {CHECKPOINT_VERSION}")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_length,) = reader.take("<I")
        name = reader.take_bytes(name_length).decode("utf-8")
        (rank,) = reader.take("<I")
        dims = reader.take(f"<{rank}I") if rank else ()
        size = int(np.prod(dims)) if dims else 1
        tensors[name] = reader.take_array(size).reshape(dims)
    if expected is not None:
        check_tensor_shapes(tensors, expected)
    return tensors


def check_tensor_shapes(
    tensors: Mapping[str, np.ndarray], expected: Mapping[str, Tuple[int, ...]]
) -> None:
    """Raise :class:`ShapeError` naming the first tensor that does not fit."""
    for name, tensor in tensors.items():
        if name not in expected:
            raise ShapeError(f"unknown tensor {name!r} for this architecture")
        if tuple(tensor.shape) != tuple(expected[name]):
            raise ShapeError(
                f"tensor {name!r} has shape {tuple(tensor.shape)}, model expects {tuple(expected[name])}"
            )
    missing = [name for name in expected if name not in tensors]
    if missing:
        raise ShapeError(f"checkpoint lacks tensor {missing[0]!r}")


# ---------------------------------------------------------------- manifest


@dataclass(frozen=True)
class ManifestEntry:
    """One video of a dataset."""

    path: str
    label: int
    split: str


@dataclass
class DatasetManifest:
    """Videos of a dataset with their labels and split.

    Attributes:
        entries: Videos in file order
        class_names: Label names; ``label`` indexes this list
    """

    entries: List[ManifestEntry]
    class_names: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: Dict[str, str] = {}
        for entry in self.entries:
            if not 0 <= entry.label < len(self.class_names):
                raise DataError(f"{entry.path}: label {entry.label} outside class list")
            if entry.split not in SPLITS:
                raise DataError(f"{entry.path}: unknown split {entry.split!r}")
            if seen.get(entry.path, entry.split) != entry.split:
                raise DataError(f"{entry.path}: listed in both splits")
            seen[entry.path] = entry.split

    def split(self, name: str) -> List[ManifestEntry]:
        """Entries of one split, in file order."""
        return [entry for entry in self.entries if entry.split == name]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def write_manifest(manifest: DatasetManifest, path: PathLike) -> Path:
    """Write ``path<TAB>label<TAB>split`` lines, labels as class names."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{entry.path}\t{manifest.class_names[entry.label]}\t{entry.split}"
        for entry in manifest.entries
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(path: PathLike, class_names: Optional[Sequence[str]] = None) -> DatasetManifest:
    """Read a manifest file.

    Args:
        path: Manifest file
        class_names: Class order; defaults to order of first appearance

    Raises:
        DataError: If the file is missing or a line is malformed
    """
    path = resolve_data_path(path)
    if not path.is_file():
        raise DataError(f"missing manifest: {path}")
    names: List[str] = list(class_names or [])
    entries: List[ManifestEntry] = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(f"{path.name} line {number}: expected path<TAB>label<TAB>split")
        video, label, split = (part.strip() for part in parts)
        if label not in names:
            if class_names is not None:
                raise DataError(f"{path.name} line {number}: unknown class {label!r}")
            names.append(label)
        entries.append(ManifestEntry(video, names.index(label), split))
    return DatasetManifest(entries, names)


def manifest_video_path(manifest_path: PathLike, entry: ManifestEntry) -> Path:
    """Resolve an entry's video path relative to the manifest file."""
    video = Path(entry.path)
    if video.is_absolute():
        return video
    return resolve_data_path(manifest_path).parent / video


# ---------------------------------------------------------------- texture sequences


def save_tti_sequence(
    sequence: TtiSequence,
    directory: PathLike,
    bound: float = 20.0,
    export_png: bool = True,
) -> List[Path]:
    """Persist a texture sequence.

    Writes ``tti.json`` (segment bounds, shape, mode, per-image float
    ranges), ``tti.f32`` (raw little-endian float32 canvases in order) and,
    when ``export_png`` is set, ``tti_0000.png`` and so on.

    Returns:
        Written paths
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    shape = list(sequence.images[0].shape) if sequence.images else []
    sidecar = {
        "count": len(sequence),
        "mode": sequence.mode,
        "shape": shape,
        "bound": bound,
        "segment_bounds": [list(b) for b in sequence.segment_bounds],
        "ranges": [[float(img.min()), float(img.max())] for img in sequence.images],
    }
    written = [save_json(sidecar, directory / "tti.json")]
    raw = directory / "tti.f32"
    raw.write_bytes(b"".join(np.asarray(img, dtype="<f4").tobytes() for img in sequence.images))
    written.append(raw)
    if export_png:
        for index, image in enumerate(sequence.images):
            written.append(write_image(export_tti_png(image, bound), directory / f"tti_{index:04d}.png"))
    return written


def load_tti_sequence(directory: PathLike) -> TtiSequence:
    """Reload a texture sequence from its sidecar and raw dump.

    Raises:
        DataError: If the sidecar or dump is missing
        FormatError: If the dump size disagrees with the sidecar
    """
    directory = Path(directory)
    sidecar = load_json(directory / "tti.json")
    raw_path = directory / "tti.f32"
    if not raw_path.is_file():
        raise DataError(f"missing texture dump: {raw_path}")
    count = int(sidecar["count"])
    shape = tuple(sidecar["shape"])
    data = raw_path.read_bytes()
    per_image = 4 * int(np.prod(shape)) if shape else 0
    if len(data) != count * per_image:
        raise FormatError(f"{raw_path.name}: {len(data)} bytes, expected {count * per_image}")
    images = [
        np.frombuffer(data, dtype="<f4", count=per_image // 4, offset=i * per_image)
        .reshape(shape)
        .astype(np.float32)
        for i in range(count)
    ]
    bounds = [tuple(b) for b in sidecar["segment_bounds"]]
    return TtiSequence(images, bounds, sidecar["mode"])
