"""Dense optical flow: flow fields, image pyramids, warping and two solvers.

The TV-L1 solver follows the duality scheme: per warp the residual is
linearized around the current estimate, a pointwise thresholding step
solves the data term, and a projected dual ascent on ``p`` solves the
total-variation term. Intensities are brought to the 8-bit range
internally so the conventional ``lambda`` keeps its meaning.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from sdtd.frames import Frame, FrameSequence, resize_bilinear, sample_bilinear, to_gray
from sdtd.models.configs import FlowConfig, FlowSolverKind, HornSchunckParams, Tvl1Params
from sdtd.models.exceptions import ShapeError
from sdtd.models.validators import ensure_finite_array

logger = logging.getLogger(__name__)

INTENSITY_SCALE = 255.0
MIN_PYRAMID_SIDE = 8
BINOMIAL_5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
# Neighbour average of the Horn-Schunck update
HS_AVERAGE = np.array(
    [[1.0 / 12, 1.0 / 6, 1.0 / 12], [1.0 / 6, 0.0, 1.0 / 6], [1.0 / 12, 1.0 / 6, 1.0 / 12]]
)


@dataclass
class FlowField:
    """Per-pixel displacement from frame t to frame t+1.

    Components are stored as float32 so that a field written to a ``.flo``
    file reads back bit-exactly.

    Attributes:
        u: Horizontal displacement, shape (H, W)
        v: Vertical displacement, shape (H, W)
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        self.u = np.ascontiguousarray(self.u, dtype=np.float32)
        self.v = np.ascontiguousarray(self.v, dtype=np.float32)
        if self.u.ndim != 2 or self.u.shape != self.v.shape:
            raise ShapeError(
                f"flow components must be equal 2-D arrays, got {self.u.shape} and {self.v.shape}"
            )
        ensure_finite_array(self.u, "flow u")
        ensure_finite_array(self.v, "flow v")

    @property
    def height(self) -> int:
        return int(self.u.shape[0])

    @property
    def width(self) -> int:
        return int(self.u.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        """Create an all-zero field."""
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    @classmethod
    def uniform(cls, height: int, width: int, u: float, v: float) -> "FlowField":
        """Create a field with the same displacement everywhere."""
        return cls(np.full((height, width), u), np.full((height, width), v))

    @classmethod
    def from_array(cls, array: np.ndarray) -> "FlowField":
        """Create a field from an (H, W, 2) array."""
        array = np.asarray(array)
        if array.ndim != 3 or array.shape[2] != 2:
            raise ShapeError(f"expected an (H, W, 2) array, got {array.shape}")
        return cls(array[:, :, 0], array[:, :, 1])

    def to_array(self) -> np.ndarray:
        """Stack the components into an (H, W, 2) float32 array."""
        return np.stack([self.u, self.v], axis=-1)

    def magnitude(self) -> np.ndarray:
        """Per-pixel displacement length."""
        return np.hypot(self.u.astype(np.float64), self.v.astype(np.float64))

    def endpoint_error(self, other: "FlowField", border: int = 0) -> float:
        """Average endpoint error against another field.

        Args:
            other: Reference field of the same size
            border: Pixels excluded along every edge
        """
        if other.shape != self.shape:
            raise ShapeError(f"flow sizes differ: {self.shape} vs {other.shape}")
        region = (slice(border, self.height - border), slice(border, self.width - border))
        du = self.u[region].astype(np.float64) - other.u[region]
        dv = self.v[region].astype(np.float64) - other.v[region]
        return float(np.mean(np.hypot(du, dv)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FlowField):
            return NotImplemented
        return np.array_equal(self.u, other.u) and np.array_equal(self.v, other.v)


def _check_gray_pair(f1: Frame, f2: Frame) -> Tuple[np.ndarray, np.ndarray]:
    if not (f1.is_gray and f2.is_gray):
        raise ShapeError("flow requires grayscale frames (convert with to_gray)")
    if f1.shape != f2.shape:
        raise ShapeError(f"frame sizes differ: {f1.shape} vs {f2.shape}")
    return f1.plane(), f2.plane()


def gaussian_pyramid(frame: Frame, levels: int, scale: float) -> List[Frame]:
    """Build a coarse-to-fine pyramid, finest level first.

    Each level is the previous one smoothed with a 5-tap binomial kernel and
    bilinearly resampled by ``scale``. Levels that would be smaller than
    8x8 are dropped.

    Args:
        frame: Level 0 image
        levels: Requested number of levels
        scale: Downsampling factor in (0, 1)

    Returns:
        List of frames, at most ``levels`` long

    Raises:
        ShapeError: If the input is smaller than 8x8
    """
    if frame.height < MIN_PYRAMID_SIDE or frame.width < MIN_PYRAMID_SIDE:
        raise ShapeError(f"frame {frame.width}x{frame.height} is smaller than 8x8")
    pyramid = [frame]
    for _ in range(1, levels):
        previous = pyramid[-1]
        height = int(np.floor(previous.height * scale + 0.5))
        width = int(np.floor(previous.width * scale + 0.5))
        if height < MIN_PYRAMID_SIDE or width < MIN_PYRAMID_SIDE:
            break
        smoothed = ndimage.convolve1d(previous.data, BINOMIAL_5, axis=0, mode="nearest")
        smoothed = ndimage.convolve1d(smoothed, BINOMIAL_5, axis=1, mode="nearest")
        pyramid.append(Frame(resize_bilinear(smoothed, (width, height))))
    return pyramid


def warp_image(frame: Frame, flow: FlowField) -> Frame:
    """Sample ``frame`` at ``(x + u, y + v)`` for every pixel, clamping at borders.

    Raises:
        ShapeError: If the frame and flow sizes differ
    """
    if (frame.height, frame.width) != flow.shape:
        raise ShapeError(f"frame {frame.shape[:2]} and flow {flow.shape} sizes differ")
    return Frame(_warp_plane(frame.data, flow.u, flow.v))


def _warp_plane(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    ys, xs = np.indices(u.shape, dtype=np.float64)
    return sample_bilinear(image, xs + u, ys + v)


def central_gradient(image: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Central differences with border replication, returned as (Ix, Iy)."""
    padded = np.pad(image, 1, mode="edge")
    ix = 0.5 * (padded[1:-1, 2:] - padded[1:-1, :-2])
    iy = 0.5 * (padded[2:, 1:-1] - padded[:-2, 1:-1])
    return ix, iy


def forward_gradient(field: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Forward differences, zero on the last column/row."""
    dx = np.zeros_like(field)
    dy = np.zeros_like(field)
    dx[:, :-1] = field[:, 1:] - field[:, :-1]
    dy[:-1, :] = field[1:, :] - field[:-1, :]
    return dx, dy


def divergence(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Backward-difference divergence, the negative adjoint of :func:`forward_gradient`."""
    div = np.zeros_like(px)
    div[:, 0] = px[:, 0]
    div[:, 1:-1] = px[:, 1:-1] - px[:, :-2]
    div[:, -1] = -px[:, -2]
    div[0, :] += py[0, :]
    div[1:-1, :] += py[1:-1, :] - py[:-2, :]
    div[-1, :] += -py[-2, :]
    return div


def _upscale_flow(
    u: np.ndarray, v: np.ndarray, size: Tuple[int, int]
) -> Tuple[np.ndarray, np.ndarray]:
    height, width = size
    fy = height / u.shape[0]
    fx = width / u.shape[1]
    return resize_bilinear(u, (width, height)) * fx, resize_bilinear(v, (width, height)) * fy


def _tvl1_level(
    i0: np.ndarray,
    i1: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    params: Tvl1Params,
) -> Tuple[np.ndarray, np.ndarray]:
    lt_scale = params.lam * params.theta
    step = params.tau / params.theta
    px1 = np.zeros_like(u)
    py1 = np.zeros_like(u)
    px2 = np.zeros_like(u)
    py2 = np.zeros_like(u)
    ix, iy = central_gradient(i1)

    for _ in range(params.warps):
        i1w = _warp_plane(i1, u, v)
        ixw = _warp_plane(ix, u, v)
        iyw = _warp_plane(iy, u, v)
        grad_sq = ixw * ixw + iyw * iyw
        rho_c = i1w - ixw * u - iyw * v - i0

        for _ in range(params.inner_iters):
            rho = rho_c + ixw * u + iyw * v
            lt = lt_scale * grad_sq
            d1 = np.zeros_like(u)
            d2 = np.zeros_like(u)
            low = rho < -lt
            high = rho > lt
            mid = ~(low | high) & (grad_sq > 1e-10)
            d1[low] = lt_scale * ixw[low]
            d2[low] = lt_scale * iyw[low]
            d1[high] = -lt_scale * ixw[high]
            d2[high] = -lt_scale * iyw[high]
            d1[mid] = -rho[mid] * ixw[mid] / grad_sq[mid]
            d2[mid] = -rho[mid] * iyw[mid] / grad_sq[mid]

            u_new = u + d1 + params.theta * divergence(px1, py1)
            v_new = v + d2 + params.theta * divergence(px2, py2)
            change = max(float(np.max(np.abs(u_new - u))), float(np.max(np.abs(v_new - v))))
            u, v = u_new, v_new

            ux, uy = forward_gradient(u)
            vx, vy = forward_gradient(v)
            norm1 = 1.0 + step * np.hypot(ux, uy)
            norm2 = 1.0 + step * np.hypot(vx, vy)
            px1 = (px1 + step * ux) / norm1
            py1 = (py1 + step * uy) / norm1
            px2 = (px2 + step * vx) / norm2
            py2 = (py2 + step * vy) / norm2
            assert np.all(np.hypot(px1, py1) <= 1.0 + 1e-9)
            assert np.all(np.hypot(px2, py2) <= 1.0 + 1e-9)

            if change < params.stop_eps:
                break

        if params.median_kernel > 1:
            u = ndimage.median_filter(u, size=params.median_kernel, mode="nearest")
            v = ndimage.median_filter(v, size=params.median_kernel, mode="nearest")
    return u, v


def tvl1_flow(f1: Frame, f2: Frame, params: Optional[Tvl1Params] = None) -> FlowField:
    """Estimate flow from ``f1`` to ``f2`` with coarse-to-fine TV-L1.

    Args:
        f1: Grayscale frame t
        f2: Grayscale frame t+1, same size
        params: Solver parameters (defaults when omitted)

    Returns:
        FlowField: Displacement of every ``f1`` pixel

    Raises:
        ShapeError: On size mismatch or color input
    """
    params = params or Tvl1Params()
    _check_gray_pair(f1, f2)
    scaled1 = Frame(f1.data * INTENSITY_SCALE)
    scaled2 = Frame(f2.data * INTENSITY_SCALE)
    pyr1 = gaussian_pyramid(scaled1, params.pyramid_levels, params.pyramid_scale)
    pyr2 = gaussian_pyramid(scaled2, params.pyramid_levels, params.pyramid_scale)

    coarsest = pyr1[-1]
    u = np.zeros((coarsest.height, coarsest.width))
    v = np.zeros_like(u)
    for level in range(len(pyr1) - 1, -1, -1):
        i0, i1 = pyr1[level].plane(), pyr2[level].plane()
        if u.shape != i0.shape:
            u, v = _upscale_flow(u, v, i0.shape)
        u, v = _tvl1_level(i0, i1, u, v, params)
        logger.debug("tvl1 level %d (%dx%d) done", level, i0.shape[1], i0.shape[0])
    return FlowField(u, v)


def horn_schunck(
    f1: Frame, f2: Frame, alpha: float = 10.0, iters: int = 300
) -> FlowField:
    """Estimate flow with classical Horn-Schunck Jacobi iterations.

    Spatial derivatives are averaged over both frames and the temporal
    derivative is ``I2 - I1``, all on the 8-bit intensity scale.

    Args:
        f1: Grayscale frame t
        f2: Grayscale frame t+1
        alpha: Smoothness weight
        iters: Jacobi iterations

    Returns:
        FlowField: Estimated displacement
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    i0, i1 = _check_gray_pair(f1, f2)
    i0 = i0 * INTENSITY_SCALE
    i1 = i1 * INTENSITY_SCALE
    ix0, iy0 = central_gradient(i0)
    ix1, iy1 = central_gradient(i1)
    ix = 0.5 * (ix0 + ix1)
    iy = 0.5 * (iy0 + iy1)
    it = i1 - i0
    denom = alpha * alpha + ix * ix + iy * iy

    u = np.zeros_like(i0)
    v = np.zeros_like(i0)
    for _ in range(iters):
        u_avg = ndimage.correlate(u, HS_AVERAGE, mode="nearest")
        v_avg = ndimage.correlate(v, HS_AVERAGE, mode="nearest")
        t = (ix * u_avg + iy * v_avg + it) / denom
        u = u_avg - ix * t
        v = v_avg - iy * t
    return FlowField(u, v)


def make_solver(config: Optional[FlowConfig] = None) -> Callable[[Frame, Frame], FlowField]:
    """Bind the configured solver and its parameters into a two-frame callable."""
    config = config or FlowConfig()
    if config.solver == FlowSolverKind.HORN_SCHUNCK:
        hs: HornSchunckParams = config.horn_schunck
        return lambda f1, f2: horn_schunck(f1, f2, hs.alpha, hs.iters)
    tvl1 = config.tvl1
    return lambda f1, f2: tvl1_flow(f1, f2, tvl1)


def compute_flows(
    sequence: FrameSequence,
    solver: Optional[Callable[[Frame, Frame], FlowField]] = None,
) -> List[FlowField]:
    """Compute flow for every consecutive pair of a video.

    Color frames are converted to luma first.

    Returns:
        ``len(sequence) - 1`` flow fields
    """
    solver = solver or make_solver()
    gray = [to_gray(frame) for frame in sequence]
    flows = [solver(gray[i], gray[i + 1]) for i in range(len(gray) - 1)]
    logger.info("computed %d flow fields for %s", len(flows), sequence.id or "video")
    return flows


def stack_flows(flows: Sequence[FlowField]) -> np.ndarray:
    """Stack fields into an (N, H, W, 2) array."""
    return np.stack([flow.to_array() for flow in flows])
