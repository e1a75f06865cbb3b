"""Tests for on-disk artifact formats."""

import struct

import numpy as np
import pytest
from PIL import Image

from sdtd.flow import FlowField
from sdtd.frames import Frame, FrameSequence
from sdtd.models.exceptions import DataError, FormatError, NumericalError, ShapeError
from sdtd.texture import TtiSequence
from sdtd.trajectories import Trajectory, TrajectorySet
from sdtd.videoio import (
    DatasetManifest,
    ManifestEntry,
    list_frame_files,
    load_checkpoint,
    load_frame_sequence,
    load_tti_sequence,
    manifest_video_path,
    read_flo,
    read_manifest,
    read_trajectories,
    save_checkpoint,
    save_tti_sequence,
    write_flo,
    write_frames,
    write_manifest,
    write_trajectories,
)


class TestFrames:
    """Test frame directory loading and writing."""

    def test_write_then_load(self, tmp_path):
        """Test 8-bit frames survive writing within quantization."""
        rng = np.random.default_rng(0)
        frames = [Frame(rng.random((6, 8, 3))) for _ in range(3)]
        write_frames(FrameSequence(frames), tmp_path / "video")
        loaded = load_frame_sequence(tmp_path / "video")
        assert len(loaded) == 3
        assert loaded.names == ["frame_00000.png", "frame_00001.png", "frame_00002.png"]
        np.testing.assert_allclose(loaded[1].data, frames[1].data, atol=0.5 / 255 + 1e-12)

    def test_grayscale_pgm(self, tmp_path):
        """Test PGM frames load as one channel."""
        write_frames(FrameSequence([Frame(np.full((4, 4), 0.5))]), tmp_path / "v", suffix=".pgm")
        loaded = load_frame_sequence(tmp_path / "v")
        assert loaded[0].channels == 1
        assert loaded[0].data[0, 0, 0] == pytest.approx(128 / 255)

    def test_list_file(self, tmp_path):
        """Test a list file naming frames relative to itself."""
        write_frames(FrameSequence([Frame(np.zeros((4, 4))), Frame(np.ones((4, 4)))]), tmp_path)
        listing = tmp_path / "frames.txt"
        listing.write_text("frame_00001.png\n# skipped\nframe_00000.png\n", encoding="utf-8")
        assert [p.name for p in list_frame_files(listing)] == ["frame_00001.png", "frame_00000.png"]
        assert load_frame_sequence(listing)[0].data.max() == 1.0

    def test_missing_path(self, tmp_path):
        """Test that a missing directory is a DataError."""
        with pytest.raises(DataError, match="missing path"):
            load_frame_sequence(tmp_path / "absent")

    def test_empty_directory(self, tmp_path):
        """Test that a directory without frames is rejected."""
        with pytest.raises(DataError, match="no frames"):
            load_frame_sequence(tmp_path)

    def test_mixed_dimensions(self, tmp_path):
        """Test that the offending file is named."""
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(tmp_path / "a.png")
        Image.fromarray(np.zeros((5, 4), dtype=np.uint8)).save(tmp_path / "b.png")
        with pytest.raises(DataError, match="b.png"):
            load_frame_sequence(tmp_path)

    def test_sixteen_bit_rejected(self, tmp_path):
        """Test that 16-bit images are unsupported."""
        Image.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(tmp_path / "deep.png")
        with pytest.raises(DataError, match="bit depth"):
            load_frame_sequence(tmp_path)


class TestFlo:
    """Test the .flo format."""

    def test_one_pixel_layout(self, tmp_path):
        """Test a 1x1 field is 20 bytes with the expected header."""
        path = write_flo(FlowField.uniform(1, 1, 1.5, -2.0), tmp_path / "a.flo")
        raw = path.read_bytes()
        assert len(raw) == 20
        assert struct.unpack("<fii", raw[:12]) == (202021.25, 1, 1)
        assert struct.unpack("<ff", raw[12:]) == (1.5, -2.0)

    def test_round_trip_is_exact(self, tmp_path):
        """Test bit-exact reload of random float32 values."""
        rng = np.random.default_rng(1)
        flow = FlowField(rng.normal(size=(5, 7)), rng.normal(size=(5, 7)))
        assert read_flo(write_flo(flow, tmp_path / "b.flo")) == flow

    def test_bad_magic(self, tmp_path):
        """Test that a wrong magic number is a FormatError."""
        path = tmp_path / "bad.flo"
        path.write_bytes(struct.pack("<fii", 1.0, 1, 1) + b"\0" * 8)
        with pytest.raises(FormatError, match="bad magic"):
            read_flo(path)

    def test_truncated(self, tmp_path):
        """Test that missing payload bytes are reported."""
        path = tmp_path / "short.flo"
        path.write_bytes(struct.pack("<fii", 202021.25, 2, 2) + b"\0" * 8)
        with pytest.raises(FormatError, match="truncated"):
            read_flo(path)

    def test_missing(self, tmp_path):
        """Test that a missing file is a DataError."""
        with pytest.raises(DataError):
            read_flo(tmp_path / "none.flo")


class TestTrajectoryFiles:
    """Test the trajectory binary format."""

    def test_layout(self, tmp_path):
        """Test header, record header and payload sizes."""
        traj = Trajectory(3, np.array([[1, 2, 0.5, 0.5], [1.5, 2.5, 0, 0]], dtype=np.float32))
        path = write_trajectories(TrajectorySet([traj], (10, 12)), tmp_path / "t.bin")
        raw = path.read_bytes()
        assert len(raw) == 16 + 8 + 32
        assert raw[:4] == b"SDTD"
        assert struct.unpack("<IHHI", raw[4:16]) == (1, 10, 12, 1)
        assert struct.unpack("<II", raw[16:24]) == (3, 2)

    def test_round_trip(self, tmp_path):
        """Test trajectories reload exactly."""
        rng = np.random.default_rng(2)
        trajectories = TrajectorySet(
            [Trajectory(i, rng.uniform(0, 9, (i + 2, 4))) for i in range(4)], (10, 10)
        )
        loaded = read_trajectories(write_trajectories(trajectories, tmp_path / "t.bin"))
        assert loaded.frame_size == (10, 10)
        assert list(loaded) == list(trajectories)

    def test_bad_magic_and_truncation(self, tmp_path):
        """Test corrupt files."""
        path = tmp_path / "bad.bin"
        path.write_bytes(b"XXXX" + b"\0" * 12)
        with pytest.raises(FormatError, match="bad magic"):
            read_trajectories(path)
        path.write_bytes(b"SDTD" + struct.pack("<IHHI", 1, 4, 4, 1) + struct.pack("<II", 0, 2))
        with pytest.raises(FormatError, match="truncated"):
            read_trajectories(path)

    def test_version_mismatch(self, tmp_path):
        """Test an unknown format version."""
        path = tmp_path / "v.bin"
        path.write_bytes(b"SDTD" + struct.pack("<IHHI", 9, 4, 4, 0))
        with pytest.raises(FormatError, match="version 9"):
            read_trajectories(path)


class TestCheckpoints:
    """Test checkpoint files."""

    def test_round_trip(self, tmp_path):
        """Test named float32 tensors reload in order."""
        params = {"conv1.W": np.arange(24.0).reshape(2, 3, 2, 2), "fc.b": np.array([0.5, -1.0])}
        loaded = load_checkpoint(save_checkpoint(params, tmp_path / "m.ckpt"))
        assert list(loaded) == ["conv1.W", "fc.b"]
        np.testing.assert_array_equal(loaded["conv1.W"], params["conv1.W"])
        assert loaded["fc.b"].dtype == np.float32

    def test_shape_mismatch_names_tensor(self, tmp_path):
        """Test that a wrong shape names the tensor."""
        path = save_checkpoint({"fc.W": np.zeros((3, 4))}, tmp_path / "m.ckpt")
        with pytest.raises(ShapeError, match="fc.W"):
            load_checkpoint(path, expected={"fc.W": (4, 3)})

    def test_unknown_and_missing_tensor(self, tmp_path):
        """Test tensors absent from either side."""
        path = save_checkpoint({"a": np.zeros(2)}, tmp_path / "m.ckpt")
        with pytest.raises(ShapeError, match="unknown tensor"):
            load_checkpoint(path, expected={"b": (2,)})
        with pytest.raises(ShapeError, match="lacks tensor 'b'"):
            load_checkpoint(path, expected={"a": (2,), "b": (2,)})

    def test_nonfinite_rejected(self, tmp_path):
        """Test that NaN weights are not written."""
        with pytest.raises(NumericalError, match="lstm.b"):
            save_checkpoint({"lstm.b": np.array([np.nan])}, tmp_path / "m.ckpt")


class TestManifest:
    """Test dataset manifests."""

    def test_round_trip(self, tmp_path):
        """Test labels are written as class names and read back as indices."""
        manifest = DatasetManifest(
            [ManifestEntry("v0", 0, "train"), ManifestEntry("v1", 1, "test")], ["circle", "zigzag"]
        )
        loaded = read_manifest(write_manifest(manifest, tmp_path / "manifest.tsv"))
        assert loaded.class_names == ["circle", "zigzag"]
        assert loaded.entries == manifest.entries
        assert [e.path for e in loaded.split("test")] == ["v1"]

    def test_malformed_line(self, tmp_path):
        """Test the line number is reported."""
        path = tmp_path / "m.tsv"
        path.write_text("v0\tcircle\ttrain\nv1 circle test\n", encoding="utf-8")
        with pytest.raises(DataError, match="line 2"):
            read_manifest(path)

    def test_unknown_split_and_duplicate(self):
        """Test split validation."""
        with pytest.raises(DataError, match="unknown split"):
            DatasetManifest([ManifestEntry("v", 0, "val")], ["a"])
        with pytest.raises(DataError, match="both splits"):
            DatasetManifest([ManifestEntry("v", 0, "train"), ManifestEntry("v", 0, "test")], ["a"])

    def test_fixed_class_list(self, tmp_path):
        """Test that an unlisted class is rejected when the order is given."""
        path = tmp_path / "m.tsv"
        path.write_text("v0\tsquare\ttrain\n", encoding="utf-8")
        with pytest.raises(DataError, match="unknown class"):
            read_manifest(path, class_names=["circle"])

    def test_video_path(self, tmp_path):
        """Test entry paths resolve next to the manifest."""
        entry = ManifestEntry("videos/v0", 0, "train")
        assert manifest_video_path(tmp_path / "manifest.tsv", entry) == tmp_path / "videos" / "v0"


class TestTtiFiles:
    """Test texture sequence persistence."""

    def test_round_trip(self, tmp_path):
        """Test the raw dump reloads losslessly and PNGs are written."""
        rng = np.random.default_rng(3)
        images = [rng.normal(size=(4, 5, 3)).astype(np.float32) for _ in range(2)]
        sequence = TtiSequence(images, [(0, 2), (3, 6)])
        written = save_tti_sequence(sequence, tmp_path / "tti")
        assert {p.name for p in written} == {"tti.json", "tti.f32", "tti_0000.png", "tti_0001.png"}
        loaded = load_tti_sequence(tmp_path / "tti")
        assert loaded.segment_bounds == [(0, 2), (3, 6)]
        for a, b in zip(loaded.images, images):
            np.testing.assert_array_equal(a, b)

    def test_empty_sequence(self, tmp_path):
        """Test a video without texture images."""
        save_tti_sequence(TtiSequence([], []), tmp_path, export_png=False)
        assert len(load_tti_sequence(tmp_path)) == 0

    def test_size_mismatch(self, tmp_path):
        """Test a dump that disagrees with its sidecar."""
        save_tti_sequence(TtiSequence([np.zeros((2, 2, 3), dtype=np.float32)], [(0, 0)]), tmp_path)
        (tmp_path / "tti.f32").write_bytes(b"\0" * 8)
        with pytest.raises(FormatError):
            load_tti_sequence(tmp_path)
