"""Quick oracle checks of every stage, run by ``sdtd selftest``.

Each check builds a tiny problem with a known answer and compares. They
take seconds in total and need no data on disk beyond a temporary
directory.
"""

import logging
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np
from scipy import ndimage

from sdtd.datagen import noise_texture
from sdtd.egomotion import estimate_homography_ransac
from sdtd.flow import FlowField, tvl1_flow
from sdtd.frames import Frame
from sdtd.models.configs import ArchitectureConfig, Tvl1Params
from sdtd.models.point import Correspondence, Point2D
from sdtd.nn.functional import sigmoid, softmax_cross_entropy, tanh_phi
from sdtd.nn.gradcheck import check_model
from sdtd.nn.lstm import LstmParams, LstmState, lstm_step
from sdtd.nn.model import CnnRnnModel
from sdtd.nn.optim import SgdState, sgd_momentum_update
from sdtd.streams.fusion import Prediction, fuse_streams
from sdtd.texture import build_sequence
from sdtd.trajectories import Trajectory, TrajectorySet, extract_trajectories
from sdtd.videoio import (
    load_checkpoint,
    read_flo,
    read_trajectories,
    save_checkpoint,
    write_flo,
    write_trajectories,
)

logger = logging.getLogger(__name__)


class OracleMismatch(Exception):
    """A self-test result disagreed with its oracle."""


def _expect(condition: bool, message: str) -> None:
    if not condition:
        raise OracleMismatch(message)


@dataclass
class SelftestReport:
    """Outcome per check; ``failures`` maps check name to message."""

    passed: List[str] = field(default_factory=list)
    failures: Dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def check_activations() -> None:
    grid = np.linspace(-20.0, 20.0, 401)
    _expect(sigmoid(np.array([0.0]))[0] == 0.5, "sigmoid(0) != 0.5")
    _expect(np.max(np.abs(tanh_phi(grid) - (2.0 * sigmoid(2.0 * grid) - 1.0))) < 1e-12, "tanh != 2 sigmoid(2x) - 1")
    with np.errstate(all="raise"):
        _expect(sigmoid(np.array([-710.0, 710.0])).tolist() == [0.0, 1.0], "sigmoid does not saturate")
    loss, _ = softmax_cross_entropy(np.zeros((1, 3)), np.array([0]))
    _expect(abs(loss - np.log(3.0)) < 1e-12, "uniform cross-entropy != ln 3")


def check_lstm() -> None:
    params = LstmParams.zeros(3, 2)
    state = lstm_step(np.array([0.3, -1.0, 2.0]), LstmState.zeros(2), params)
    _expect(np.all(state.h == 0.0) and np.all(state.c == 0.0), "zero-weight LSTM is not at rest")
    params.b_f[:] = 20.0
    carried = LstmState(np.zeros(2), np.array([0.7, -0.4]))
    for _ in range(10):
        carried = lstm_step(np.zeros(3), carried, params)
    _expect(np.allclose(carried.c, [0.7, -0.4], atol=1e-7), "open forget gate does not carry memory")


def check_sgd() -> None:
    theta = {"w": np.array([1.0])}
    state = SgdState(learning_rate=0.1, momentum=0.9)
    sgd_momentum_update(theta, {"w": np.array([1.0])}, state)
    _expect(np.isclose(state.velocity["w"][0], -0.1), "first velocity != -0.1")
    sgd_momentum_update(theta, {"w": np.array([1.0])}, state)
    _expect(np.isclose(theta["w"][0], 1.0 - 0.29), "two steps do not move theta by -0.29")


def check_gradients() -> None:
    arch = ArchitectureConfig(layers="conv3x3x2,relu,pool,fc4", lstm_hidden=3)
    model = CnnRnnModel((1, 4, 4), 3, arch, seed=1)
    clips = np.random.default_rng(2).uniform(-1.0, 1.0, (2, 3, 1, 4, 4))
    error = check_model(model, clips, np.array([0, 2]), samples=20)
    _expect(error < 1e-4, f"CNN-RNN gradient relative error {error:.2e}")


def check_flow() -> None:
    base = noise_texture((40, 40), 1.5, np.random.default_rng(3))
    moved = ndimage.shift(base, (0.0, 1.5), order=3, mode="wrap")
    flow = tvl1_flow(Frame.from_plane(base), Frame.from_plane(moved), Tvl1Params(pyramid_levels=3))
    expected = FlowField.uniform(40, 40, 1.5, 0.0)
    error = flow.endpoint_error(expected, border=6)
    _expect(error < 0.3, f"global shift endpoint error {error:.3f}")


def check_trajectories() -> None:
    flows = [FlowField.zeros(24, 24) for _ in range(4)]
    _expect(len(extract_trajectories(flows)) == 0, "static video produced trajectories")


def check_texture() -> None:
    rng = np.random.default_rng(4)
    trajectories = []
    for start in range(4):
        pts = np.zeros((3, 4), dtype=np.float32)
        pts[:, :2] = rng.uniform(0, 15, (3, 2))
        pts[:, 2:] = rng.uniform(-3, 3, (3, 2))
        trajectories.append(Trajectory(start, pts))
    sequence = build_sequence(TrajectorySet(trajectories, (16, 16)), (16, 16), threshold=2)
    for image in sequence.images:
        written = np.any(image != 0, axis=2)
        ch = image.astype(np.float64)
        identity = np.abs(ch[..., 2] ** 2 - ch[..., 0] ** 2 - ch[..., 1] ** 2)[written]
        _expect(identity.size == 0 or identity.max() < 1e-4, "magnitude channel breaks ch3^2 = ch1^2 + ch2^2")


def check_formats() -> None:
    rng = np.random.default_rng(5)
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        flow = FlowField(rng.normal(size=(5, 7)), rng.normal(size=(5, 7)))
        _expect(read_flo(write_flo(flow, root / "a.flo")) == flow, ".flo round trip differs")
        points = np.zeros((3, 4), dtype=np.float32)
        points[:, :2] = rng.uniform(0, 4, (3, 2))
        trajs = TrajectorySet([Trajectory(2, points)], (5, 5))
        back = read_trajectories(write_trajectories(trajs, root / "t.sdtd"))
        _expect(back.trajectories == trajs.trajectories, "trajectory round trip differs")
        tensors = {"w": rng.normal(size=(2, 3)).astype(np.float32)}
        loaded = load_checkpoint(save_checkpoint(tensors, root / "c.sdck"))
        _expect(np.array_equal(loaded["w"], tensors["w"]), "checkpoint round trip differs")


def check_homography() -> None:
    rng = np.random.default_rng(6)
    truth = np.array([[1.01, 0.02, 3.0], [-0.01, 0.99, -2.0], [1e-4, 0.0, 1.0]])
    src = rng.uniform(0, 100, (60, 2))
    projected = np.c_[src, np.ones(60)] @ truth.T
    dst = projected[:, :2] / projected[:, 2:]
    dst[::2] += rng.uniform(-30, 30, (30, 2))
    corrs = [
        Correspondence(p1=Point2D(x=float(a), y=float(b)), p2=Point2D(x=float(c), y=float(d)))
        for (a, b), (c, d) in zip(src, dst)
    ]
    h, mask = estimate_homography_ransac(corrs, iters=500, inlier_thresh=1.0, seed=0)
    recovered = np.asarray(h.transform_points(src[1::2]))
    residual = float(np.max(np.hypot(*(recovered - dst[1::2]).T)))
    _expect(residual < 0.5, f"inlier reprojection error {residual:.3f}")


def check_fusion() -> None:
    p = Prediction(np.array([0.2, 0.5, 0.3]))
    q = Prediction(np.array([0.6, 0.1, 0.3]))
    fused = fuse_streams({"spatial": p, "temporal": q}, {"spatial": 1.0, "temporal": 3.0})
    _expect(abs(fused.probs.sum() - 1.0) < 1e-6 and fused.label == 0, "fusion left the simplex")


CHECKS: Tuple[Tuple[str, Callable[[], None]], ...] = (
    ("activations", check_activations),
    ("lstm", check_lstm),
    ("sgd", check_sgd),
    ("gradients", check_gradients),
    ("flow", check_flow),
    ("trajectories", check_trajectories),
    ("texture", check_texture),
    ("formats", check_formats),
    ("homography", check_homography),
    ("fusion", check_fusion),
)


def run_selftest() -> SelftestReport:
    """Run every check and collect the outcome."""
    report = SelftestReport()
    for name, check in CHECKS:
        try:
            check()
        except OracleMismatch as exc:
            report.failures[name] = str(exc)
            logger.error("selftest %s failed: %s", name, exc)
        else:
            report.passed.append(name)
            logger.info("selftest %s passed", name)
    return report
