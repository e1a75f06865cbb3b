"""Tests for flow fields, pyramids, warping and the two flow solvers."""

import time

import numpy as np
import pytest

from sdtd.datagen import noise_texture
from sdtd.flow import (
    FlowField,
    central_gradient,
    compute_flows,
    divergence,
    forward_gradient,
    gaussian_pyramid,
    horn_schunck,
    make_solver,
    stack_flows,
    tvl1_flow,
    warp_image,
)
from sdtd.frames import Frame, FrameSequence
from sdtd.models.configs import FlowConfig, FlowSolverKind, HornSchunckParams, Tvl1Params
from sdtd.models.exceptions import ShapeError


def textured(size=48, seed=0):
    return noise_texture((size, size), 1.5, np.random.default_rng(seed))


def shifted_pair(dx, size=48, seed=0):
    base = textured(size, seed)
    return Frame.from_plane(base), Frame.from_plane(np.roll(base, dx, axis=1))


def block_match(f1, f2, radius=4, block=16, border=8):
    """Exhaustive SSD block matching over integer shifts, as a dense flow field.

    Each ``block`` x ``block`` tile of the interior gets the shift (dx, dy),
    |dx|, |dy| <= ``radius``, minimizing the sum of squared differences
    between ``f1`` and ``f2`` sampled at the shifted tile.
    """
    a, b = f1.plane(), f2.plane()
    height, width = a.shape
    u = np.zeros((height, width))
    v = np.zeros((height, width))
    shifts = [(dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    for y0 in range(border, height - border, block):
        for x0 in range(border, width - border, block):
            y1, x1 = min(y0 + block, height - border), min(x0 + block, width - border)
            tile = a[y0:y1, x0:x1]
            costs = [
                float(np.sum((b[y0 + dy : y1 + dy, x0 + dx : x1 + dx] - tile) ** 2)) for dx, dy in shifts
            ]
            u[y0:y1, x0:x1], v[y0:y1, x0:x1] = shifts[int(np.argmin(costs))]
    return FlowField(u, v)


def seeded_shift(seed, size=128, radius=4):
    """A textured frame pair related by a seeded integer global shift."""
    rng = np.random.default_rng(seed)
    dx, dy = (int(s) for s in rng.integers(-radius, radius + 1, size=2))
    base = noise_texture((size, size), 1.5, rng)
    return Frame.from_plane(base), Frame.from_plane(np.roll(base, (dy, dx), axis=(0, 1))), (dx, dy)


class TestFlowField:
    """Test the FlowField container."""

    def test_float32_storage(self):
        """Test that components are stored as float32."""
        flow = FlowField(np.zeros((2, 3)), np.ones((2, 3)))
        assert flow.u.dtype == np.float32
        assert flow.shape == (2, 3)

    def test_shape_mismatch(self):
        """Test that u and v must agree."""
        with pytest.raises(ShapeError):
            FlowField(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_array_round_trip(self):
        """Test (H, W, 2) conversion."""
        flow = FlowField.uniform(3, 4, 1.5, -2.0)
        assert FlowField.from_array(flow.to_array()) == flow
        assert stack_flows([flow, flow]).shape == (2, 3, 4, 2)

    def test_endpoint_error(self):
        """Test AEE of a constant offset, with and without a border."""
        a = FlowField.uniform(10, 10, 3.0, 4.0)
        b = FlowField.zeros(10, 10)
        assert a.endpoint_error(b) == pytest.approx(5.0)
        assert a.endpoint_error(b, border=2) == pytest.approx(5.0)

    def test_magnitude(self):
        """Test per-pixel magnitude."""
        np.testing.assert_allclose(FlowField.uniform(2, 2, 3.0, 4.0).magnitude(), 5.0)


class TestGaussianPyramid:
    """Test pyramid construction."""

    def test_single_level_is_identity(self):
        """Test levels=1 returns the input unchanged."""
        frame = Frame.from_plane(textured(16))
        pyramid = gaussian_pyramid(frame, 1, 0.5)
        assert len(pyramid) == 1
        assert pyramid[0] is frame

    def test_constant_image(self):
        """Test that a constant image stays constant at every level."""
        pyramid = gaussian_pyramid(Frame.from_plane(np.full((32, 32), 0.7)), 4, 0.5)
        for level in pyramid:
            np.testing.assert_allclose(level.plane(), 0.7, atol=1e-6)

    def test_truncated_at_eight(self):
        """Test 64x64 with 10 requested levels stops at 8x8."""
        pyramid = gaussian_pyramid(Frame.from_plane(textured(64)), 10, 0.5)
        assert [level.width for level in pyramid] == [64, 32, 16, 8]

    def test_too_small(self):
        """Test that inputs below 8x8 are rejected."""
        with pytest.raises(ShapeError):
            gaussian_pyramid(Frame.from_plane(np.zeros((4, 4))), 2, 0.5)


class TestWarpImage:
    """Test backward warping."""

    def test_zero_flow(self):
        """Test that zero flow is the identity."""
        frame = Frame.from_plane(textured(16))
        np.testing.assert_array_equal(warp_image(frame, FlowField.zeros(16, 16)).data, frame.data)

    def test_integer_shift_on_ramp(self):
        """Test that flow (1, 0) on a ramp advances one step in the interior."""
        ramp = np.tile(np.arange(10.0), (5, 1))
        warped = warp_image(Frame.from_plane(ramp), FlowField.uniform(5, 10, 1.0, 0.0)).plane()
        np.testing.assert_allclose(warped[:, :-1], ramp[:, :-1] + 1.0)

    def test_subpixel_matches_bilinear_oracle(self):
        """Test random subpixel flow against a per-pixel bilinear formula."""
        rng = np.random.default_rng(1)
        image = rng.random((12, 12))
        u = rng.uniform(-2, 2, (12, 12))
        v = rng.uniform(-2, 2, (12, 12))
        warped = warp_image(Frame.from_plane(image), FlowField(u, v)).plane()
        flow = FlowField(u, v)
        for y in range(12):
            for x in range(12):
                sx = min(max(x + float(flow.u[y, x]), 0.0), 11.0)
                sy = min(max(y + float(flow.v[y, x]), 0.0), 11.0)
                x0, y0 = int(np.floor(sx)), int(np.floor(sy))
                x1, y1 = min(x0 + 1, 11), min(y0 + 1, 11)
                fx, fy = sx - x0, sy - y0
                expected = (
                    image[y0, x0] * (1 - fx) * (1 - fy)
                    + image[y0, x1] * fx * (1 - fy)
                    + image[y1, x0] * (1 - fx) * fy
                    + image[y1, x1] * fx * fy
                )
                assert warped[y, x] == pytest.approx(expected, abs=1e-6)

    def test_size_mismatch(self):
        """Test that frame and flow sizes must agree."""
        with pytest.raises(ShapeError):
            warp_image(Frame.from_plane(np.zeros((4, 4))), FlowField.zeros(4, 5))


class TestDifferenceOperators:
    """Test the discrete gradient and divergence."""

    def test_divergence_is_negative_adjoint(self):
        """Test <grad u, p> == -<u, div p>."""
        rng = np.random.default_rng(2)
        u = rng.standard_normal((7, 9))
        px, py = rng.standard_normal((2, 7, 9))
        ux, uy = forward_gradient(u)
        assert np.sum(ux * px + uy * py) == pytest.approx(-np.sum(u * divergence(px, py)))

    def test_central_gradient_of_ramp(self):
        """Test central differences on a linear ramp."""
        ramp = np.tile(np.arange(6.0), (4, 1))
        ix, iy = central_gradient(ramp)
        np.testing.assert_allclose(ix[:, 1:-1], 1.0)
        np.testing.assert_allclose(iy, 0.0)


class TestTvl1:
    """Test the TV-L1 solver."""

    def test_zero_motion(self):
        """Test that identical textured frames give near-zero flow."""
        f1, _ = shifted_pair(0, size=32)
        flow = tvl1_flow(f1, f1)
        assert float(np.mean(np.abs(flow.u))) < 0.05
        assert float(np.mean(np.abs(flow.v))) < 0.05

    def test_global_shift(self):
        """Test AEE below 0.2 px for a two-pixel shift."""
        f1, f2 = shifted_pair(2)
        flow = tvl1_flow(f1, f2)
        assert flow.endpoint_error(FlowField.uniform(48, 48, 2.0, 0.0), border=8) < 0.2

    def test_untextured_frames(self):
        """Test that constant frames give finite, tiny flow."""
        frame = Frame.from_plane(np.full((16, 16), 0.5))
        flow = tvl1_flow(frame, frame)
        assert np.all(np.isfinite(flow.u))
        assert float(flow.magnitude().max()) < 1e-3

    def test_median_filter_between_warps(self):
        """Test that the median filter changes the estimate without hurting accuracy."""
        f1, f2 = shifted_pair(2)
        filtered = tvl1_flow(f1, f2, Tvl1Params(median_kernel=5))
        plain = tvl1_flow(f1, f2, Tvl1Params(median_kernel=1))
        truth = FlowField.uniform(48, 48, 2.0, 0.0)
        assert filtered != plain
        assert filtered.endpoint_error(truth, border=8) < 0.2

    def test_color_rejected(self):
        """Test that color frames must be converted first."""
        frame = Frame(np.zeros((16, 16, 3)))
        with pytest.raises(ShapeError, match="grayscale"):
            tvl1_flow(frame, frame)


class TestShiftRecovery:
    """Test TV-L1 against exhaustive block matching on seeded global shifts."""

    def test_oracle_finds_shift(self):
        """Test that block matching recovers the integer shift exactly."""
        f1, f2, (dx, dy) = seeded_shift(0, size=48)
        expected = FlowField.uniform(48, 48, float(dx), float(dy))
        assert block_match(f1, f2).endpoint_error(expected, border=8) == 0.0

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(10))
    def test_seeded_shift(self, seed):
        """Test interior AEE below 0.2 px and under 5 s per 128x128 pair."""
        f1, f2, (dx, dy) = seeded_shift(seed)
        oracle = block_match(f1, f2)
        assert oracle.endpoint_error(FlowField.uniform(128, 128, float(dx), float(dy)), border=8) == 0.0

        started = time.perf_counter()
        flow = tvl1_flow(f1, f2)
        elapsed = time.perf_counter() - started
        assert flow.endpoint_error(oracle, border=8) < 0.2
        assert elapsed < 5.0


class TestHornSchunck:
    """Test the Horn-Schunck baseline."""

    def test_identical_frames_exact_zero(self):
        """Test that identical frames give exactly zero flow."""
        frame = Frame.from_plane(textured(16))
        flow = horn_schunck(frame, frame, iters=20)
        assert not np.any(flow.u) and not np.any(flow.v)

    def test_global_shift(self):
        """Test AEE below 0.4 px for a one-pixel shift."""
        f1, f2 = shifted_pair(1)
        flow = horn_schunck(f1, f2)
        assert flow.endpoint_error(FlowField.uniform(48, 48, 1.0, 0.0), border=8) < 0.4

    def test_deterministic(self):
        """Test bitwise repeatability."""
        f1, f2 = shifted_pair(1, size=24)
        assert horn_schunck(f1, f2, iters=30) == horn_schunck(f1, f2, iters=30)

    def test_alpha_positive(self):
        """Test the alpha precondition."""
        frame = Frame.from_plane(np.zeros((8, 8)))
        with pytest.raises(ValueError):
            horn_schunck(frame, frame, alpha=0.0)


class TestSolverSelection:
    """Test make_solver and compute_flows."""

    def test_horn_schunck_selected(self):
        """Test that the configured solver and parameters are used."""
        config = FlowConfig(solver=FlowSolverKind.HORN_SCHUNCK, horn_schunck=HornSchunckParams(iters=5))
        f1, f2 = shifted_pair(1, size=16)
        assert make_solver(config)(f1, f2) == horn_schunck(f1, f2, 10.0, 5)

    def test_compute_flows_count(self):
        """Test one flow per consecutive pair, color frames converted to luma."""
        rgb = np.repeat(textured(16)[:, :, np.newaxis], 3, axis=2)
        sequence = FrameSequence([Frame(rgb) for _ in range(3)])
        config = FlowConfig(tvl1=Tvl1Params(warps=1, inner_iters=5, pyramid_levels=1))
        flows = compute_flows(sequence, make_solver(config))
        assert len(flows) == 2
        assert flows[0].shape == (16, 16)
