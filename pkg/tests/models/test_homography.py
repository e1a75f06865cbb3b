"""Tests for the Homography model."""

import numpy as np
import pytest
from pydantic import ValidationError

from sdtd.models.exceptions import DegenerateGeometryError, ProjectionError
from sdtd.models.homography import Homography


class TestHomography:
    """Test Homography construction and mapping."""

    def test_identity(self):
        """Test the identity maps points to themselves."""
        h = Homography.identity()
        assert h.is_identity()
        points = np.array([[1.0, 2.0], [30.0, -4.0]])
        np.testing.assert_allclose(h.transform_points(points), points)

    def test_translation(self):
        """Test a pure translation."""
        h = Homography.translation(2.0, -1.0)
        np.testing.assert_allclose(h.transform_points(np.array([[0.0, 0.0]])), [[2.0, -1.0]])

    def test_from_array_normalizes(self):
        """Test that scale is removed so h[2][2] == 1."""
        h = Homography.from_array(2.0 * np.eye(3))
        assert h.rows[2][2] == 1.0
        assert h.is_identity()

    def test_from_array_rejects_zero_corner(self):
        """Test that h[2][2] == 0 is degenerate."""
        matrix = np.eye(3)
        matrix[2, 2] = 0.0
        with pytest.raises(DegenerateGeometryError, match="degenerate geometry"):
            Homography.from_array(matrix)

    def test_from_array_rejects_singular(self):
        """Test that a singular matrix is degenerate."""
        matrix = np.ones((3, 3))
        with pytest.raises(DegenerateGeometryError):
            Homography.from_array(matrix)

    def test_from_array_rejects_bad_shape(self):
        """Test the 3x3 requirement."""
        with pytest.raises(ValueError, match="3x3"):
            Homography.from_array(np.eye(2))

    def test_unnormalized_rows_rejected(self):
        """Test the normalization invariant on direct construction."""
        with pytest.raises(ValidationError, match="must be 1"):
            Homography(rows=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 2.0)))

    def test_inverse_and_compose(self):
        """Test that h @ h.inverse() is the identity."""
        h = Homography.from_array(np.array([[1.1, 0.05, 3.0], [-0.02, 0.95, 1.0], [1e-4, 2e-4, 1.0]]))
        assert (h @ h.inverse()).is_identity(tol=1e-9)

    def test_projection_to_infinity(self):
        """Test that a pixel on the vanishing line raises."""
        h = Homography.from_array(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-0.01, 0.0, 1.0]]))
        with pytest.raises(ProjectionError, match="infinity"):
            h.transform_points(np.array([[100.0, 5.0]]))

    def test_dict_round_trip(self):
        """Test dictionary round trip preserves every entry."""
        h = Homography.translation(1.5, 2.5)
        assert Homography.from_dict(h.to_dict()) == h
