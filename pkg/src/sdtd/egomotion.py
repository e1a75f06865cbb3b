"""Camera-motion estimation and removal.

Harris corners on frame t are matched into frame t+1 through the optical
flow, a homography is fitted to the correspondences with RANSAC over
normalized DLT, and the flow induced by that homography is subtracted (or
frame t+1 is rectified and the flow solved again).
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from sdtd.flow import FlowField
from sdtd.frames import Frame, FrameSequence, sample_bilinear, to_gray
from sdtd.models.configs import CompensationMode, EgomotionConfig
from sdtd.models.exceptions import ConfigError, DegenerateGeometryError, GeometryError, ShapeError
from sdtd.models.homography import INFINITY_EPS, Homography
from sdtd.models.point import Correspondence, Point2D

logger = logging.getLogger(__name__)

# Minimum triangle area (normalized coordinates) for a sample to count as
# having no three collinear points
COLLINEAR_EPS = 1e-3


def harris_response(image: np.ndarray, k: float = 0.04, sigma: float = 1.0) -> np.ndarray:
    """Harris corner response ``det(M) - k * trace(M)^2`` of an (H, W) image."""
    ix = ndimage.sobel(image, axis=1, mode="nearest")
    iy = ndimage.sobel(image, axis=0, mode="nearest")
    sxx = ndimage.gaussian_filter(ix * ix, sigma, mode="nearest")
    syy = ndimage.gaussian_filter(iy * iy, sigma, mode="nearest")
    sxy = ndimage.gaussian_filter(ix * iy, sigma, mode="nearest")
    return sxx * syy - sxy * sxy - k * (sxx + syy) ** 2


def detect_corners(
    frame: Frame,
    max_count: int = 400,
    quality_ratio: float = 0.01,
    k: float = 0.04,
    sigma: float = 1.0,
) -> List[Tuple[int, int]]:
    """Find the strongest Harris corners of a grayscale frame.

    Keeps 3x3 local maxima whose response is at least ``quality_ratio``
    times the strongest response, then the ``max_count`` strongest, ordered
    by response (descending) and then row-major position.

    Returns:
        Corner positions as (x, y); empty for flat images
    """
    response = harris_response(frame.plane(), k, sigma)
    peak = float(response.max())
    if peak <= 0.0:
        return []
    local_max = response == ndimage.maximum_filter(response, size=3, mode="nearest")
    keep = local_max & (response >= quality_ratio * peak) & (response > 0.0)
    ys, xs = np.nonzero(keep)
    order = np.lexsort((xs, ys, -response[ys, xs]))[:max_count]
    return [(int(xs[i]), int(ys[i])) for i in order]


def match_by_flow(points: Sequence[Tuple[float, float]], flow: FlowField) -> List[Correspondence]:
    """Pair each point with its flow-displaced position in the next frame.

    Flow is read at the rounded point; pairs whose target leaves the frame
    are dropped.
    """
    matches = []
    for x, y in points:
        xi, yi = int(np.floor(x + 0.5)), int(np.floor(y + 0.5))
        x2 = float(x) + float(flow.u[yi, xi])
        y2 = float(y) + float(flow.v[yi, xi])
        if 0.0 <= x2 <= flow.width - 1 and 0.0 <= y2 <= flow.height - 1:
            matches.append(Correspondence(p1=Point2D(x=float(x), y=float(y)), p2=Point2D(x=x2, y=y2)))
    return matches


def normalize_points(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Hartley normalization: centroid to origin, mean distance sqrt(2).

    Returns:
        Normalized (N, 2) points and the 3x3 transform that produced them

    Raises:
        DegenerateGeometryError: If all points coincide
    """
    centroid = points.mean(axis=0)
    mean_dist = float(np.sqrt(((points - centroid) ** 2).sum(axis=1)).mean())
    if mean_dist < 1e-12:
        raise DegenerateGeometryError("degenerate geometry: all points coincide")
    s = np.sqrt(2.0) / mean_dist
    transform = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    return (points - centroid) * s, transform


def _build_a(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    x, y = src[:, 0], src[:, 1]
    u, v = dst[:, 0], dst[:, 1]
    n = len(src)
    zeros, ones = np.zeros(n), np.ones(n)
    a = np.zeros((2 * n, 9))
    a[0::2] = np.column_stack([x, y, ones, zeros, zeros, zeros, -u * x, -u * y, -u])
    a[1::2] = np.column_stack([zeros, zeros, zeros, -x, -y, -ones, v * x, v * y, v])
    return a


def dlt_homography(src: np.ndarray, dst: np.ndarray) -> Optional[np.ndarray]:
    """Normalized DLT for ``dst ~ H src``; ``None`` when the system is degenerate."""
    try:
        src_n, t_src = normalize_points(src)
        dst_n, t_dst = normalize_points(dst)
    except DegenerateGeometryError:
        return None
    a = _build_a(src_n, dst_n)
    if np.linalg.matrix_rank(a) < 8:
        return None
    _, _, vt = np.linalg.svd(a)
    h_n = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h_n @ t_src
    if abs(h[2, 2]) < INFINITY_EPS:
        return None
    return h / h[2, 2]


def _noncollinear(points: np.ndarray) -> bool:
    centered, _ = normalize_points(points)
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        p, q, r = centered[i], centered[j], centered[k]
        area = 0.5 * abs((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
        if area <= COLLINEAR_EPS:
            return False
    return True


def _project(h: np.ndarray, points: np.ndarray) -> np.ndarray:
    q = np.column_stack([points, np.ones(len(points))]) @ h.T
    w = q[:, 2]
    out = np.full((len(points), 2), np.inf)
    ok = np.abs(w) >= INFINITY_EPS
    out[ok] = q[ok, :2] / w[ok, None]
    return out


def symmetric_transfer_error(h: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Per-pair ``sqrt(|H src - dst|^2 + |H^-1 dst - src|^2)``, inf where undefined."""
    try:
        h_inv = np.linalg.inv(h)
    except np.linalg.LinAlgError:
        return np.full(len(src), np.inf)
    forward = _project(h, src) - dst
    backward = _project(h_inv, dst) - src
    with np.errstate(invalid="ignore", over="ignore"):
        err = np.sqrt((forward ** 2).sum(axis=1) + (backward ** 2).sum(axis=1))
    return np.where(np.isfinite(err), err, np.inf)


def estimate_homography_ransac(
    corrs: Sequence[Correspondence],
    iters: int = 500,
    inlier_thresh: float = 1.5,
    seed: int = 0,
) -> Tuple[Homography, np.ndarray]:
    """Fit a homography to correspondences containing outliers.

    Each iteration draws 4 correspondences with a seeded generator, skips
    samples with three collinear points, solves a normalized DLT and counts
    inliers by symmetric transfer error. The best hypothesis is refit on its
    inliers and the inlier mask recomputed with the refit.

    Args:
        corrs: Point correspondences, at least 4
        iters: Samples drawn
        inlier_thresh: Inlier bound in pixels
        seed: Generator seed

    Returns:
        Normalized homography and boolean inlier mask

    Raises:
        GeometryError: With fewer than 4 correspondences
        DegenerateGeometryError: If no sample yields a homography
    """
    if len(corrs) < 4:
        raise GeometryError(f"need at least 4 correspondences, got {len(corrs)}")
    src = np.array([c.p1.as_tuple() for c in corrs], dtype=np.float64)
    dst = np.array([c.p2.as_tuple() for c in corrs], dtype=np.float64)
    rng = np.random.default_rng(seed)

    best_h: Optional[np.ndarray] = None
    best_mask = np.zeros(len(src), dtype=bool)
    best_count = -1
    for _ in range(iters):
        idx = rng.choice(len(src), size=4, replace=False)
        try:
            if not (_noncollinear(src[idx]) and _noncollinear(dst[idx])):
                continue
        except DegenerateGeometryError:
            continue
        h = dlt_homography(src[idx], dst[idx])
        if h is None:
            continue
        mask = symmetric_transfer_error(h, src, dst) < inlier_thresh
        count = int(mask.sum())
        if count > best_count:
            best_h, best_mask, best_count = h, mask, count

    if best_h is None:
        raise DegenerateGeometryError("degenerate geometry: every minimal sample is collinear")

    if best_count >= 4:
        refit = dlt_homography(src[best_mask], dst[best_mask])
        if refit is not None:
            refit_mask = symmetric_transfer_error(refit, src, dst) < inlier_thresh
            if refit_mask.sum() >= best_count:
                best_h, best_mask = refit, refit_mask
    assert np.all(symmetric_transfer_error(best_h, src[best_mask], dst[best_mask]) < inlier_thresh)
    return Homography.from_array(best_h), best_mask


def homography_flow(h: Homography, height: int, width: int) -> FlowField:
    """Displacement ``H p - p`` induced by a homography at every pixel.

    Raises:
        ProjectionError: If a pixel maps to infinity
    """
    ys, xs = np.indices((height, width), dtype=np.float64)
    points = np.column_stack([xs.ravel(), ys.ravel()])
    moved = h.transform_points(points) - points
    return FlowField(moved[:, 0].reshape(height, width), moved[:, 1].reshape(height, width))


def compensate_flow(flow: FlowField, h: Homography) -> FlowField:
    """Remove the camera-induced displacement from a flow field.

    Raises:
        ProjectionError: If the homography maps a pixel to infinity
    """
    ys, xs = np.indices(flow.shape, dtype=np.float64)
    points = np.column_stack([xs.ravel(), ys.ravel()])
    camera = (h.transform_points(points) - points).reshape(flow.height, flow.width, 2)
    u = flow.u.astype(np.float64) - camera[:, :, 0]
    v = flow.v.astype(np.float64) - camera[:, :, 1]
    return FlowField(u, v)


def rectify_frame(frame: Frame, h: Homography) -> Frame:
    """Resample frame t+1 at ``H p`` so its camera motion relative to frame t vanishes."""
    ys, xs = np.indices((frame.height, frame.width), dtype=np.float64)
    mapped = h.transform_points(np.column_stack([xs.ravel(), ys.ravel()]))
    sampled = sample_bilinear(
        frame.data,
        mapped[:, 0].reshape(frame.height, frame.width),
        mapped[:, 1].reshape(frame.height, frame.width),
    )
    return Frame(sampled)


@dataclass
class CompensationResult:
    """Per-video compensation output.

    Attributes:
        flows: Compensated (or passed-through) flow per frame pair
        homographies: Estimated homography per pair, ``None`` where it failed
        warnings: One message per pair whose flow passed through unchanged
    """

    flows: List[FlowField]
    homographies: List[Optional[Homography]] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


def compensate_sequence(
    frames: FrameSequence,
    flows: Sequence[FlowField],
    config: Optional[EgomotionConfig] = None,
    solver: Optional[Callable[[Frame, Frame], FlowField]] = None,
) -> CompensationResult:
    """Remove camera motion from every flow field of a video.

    Pair ``i`` uses RANSAC seed ``config.seed + i``. When estimation fails
    the flow passes through unchanged and a warning is recorded.

    Args:
        frames: The video
        flows: Raw flow per consecutive pair
        config: Compensation settings
        solver: Flow solver, required by the warp-recompute mode

    Raises:
        ShapeError: If ``len(flows) != len(frames) - 1``
        ConfigError: If warp-recompute mode is requested without a solver
    """
    config = config or EgomotionConfig()
    if len(flows) != len(frames) - 1:
        raise ShapeError(f"{len(frames)} frames need {len(frames) - 1} flows, got {len(flows)}")
    mode = CompensationMode(config.mode)
    if mode == CompensationMode.OFF:
        return CompensationResult(list(flows), [None] * len(flows))
    if mode == CompensationMode.WARP_RECOMPUTE and solver is None:
        raise ConfigError("warp-recompute compensation needs a flow solver")

    result = CompensationResult(flows=[])
    for index, flow in enumerate(flows):
        gray = to_gray(frames[index])
        corners = detect_corners(
            gray, config.max_corners, config.quality_ratio, config.harris_k, config.harris_sigma
        )
        try:
            corrs = match_by_flow(corners, flow)
            h, mask = estimate_homography_ransac(
                corrs, config.iters, config.inlier_thresh, config.seed + index
            )
            if mode == CompensationMode.SUBTRACT:
                compensated = compensate_flow(flow, h)
            else:
                rectified = rectify_frame(to_gray(frames[index + 1]), h)
                compensated = solver(gray, rectified)
        except GeometryError as exc:
            message = f"pair {index}: {exc}; flow passed through"
            logger.warning("%s %s", frames.id or "video", message)
            result.flows.append(flow)
            result.homographies.append(None)
            result.warnings.append(message)
            continue
        logger.debug("pair %d: %d/%d inliers", index, int(mask.sum()), len(mask))
        result.flows.append(compensated)
        result.homographies.append(h)
    return result
