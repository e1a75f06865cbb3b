"""Tests for Point2D and Correspondence models."""

import pytest
from pydantic import ValidationError

from sdtd.models.point import Correspondence, Point2D


class TestPoint2D:
    """Test Point2D model."""

    def test_creation(self):
        """Test creating a Point2D."""
        p = Point2D(x=3.0, y=4.0)
        assert p.x == 3.0
        assert p.y == 4.0

    def test_integer_coordinates(self):
        """Test that integer coordinates are accepted."""
        p = Point2D(x=3, y=4)
        assert p.x == 3.0
        assert p.y == 4.0

    def test_invalid_coordinates(self):
        """Test that non-finite coordinates are rejected."""
        with pytest.raises(ValidationError, match="must be a finite number"):
            Point2D(x=float("inf"), y=0)
        with pytest.raises(ValidationError, match="must be a finite number"):
            Point2D(x=0, y=float("nan"))

    def test_origin_factory(self):
        """Test origin factory method."""
        assert Point2D.origin().as_tuple() == (0.0, 0.0)

    def test_string_representation(self):
        """Test string representations."""
        p = Point2D(x=3.0, y=4.0)
        assert str(p) == "Point2D(3.0, 4.0)"
        assert repr(p) == "Point2D(x=3.0, y=4.0)"

    def test_equality_and_hash(self):
        """Test point equality and hashing."""
        p1 = Point2D(x=3.0, y=4.0)
        p2 = Point2D(x=3.0, y=4.0)
        assert p1 == p2
        assert hash(p1) == hash(p2)
        assert p1 != Point2D(x=3.0, y=5.0)
        assert p1 != "not a point"

    def test_arithmetic(self):
        """Test addition, subtraction and translation."""
        p = Point2D(x=1.0, y=2.0)
        assert (p + Point2D(x=0.5, y=0.5)).as_tuple() == (1.5, 2.5)
        assert (p - Point2D(x=1.0, y=1.0)).as_tuple() == (0.0, 1.0)
        assert p.translate(2.0, -2.0).as_tuple() == (3.0, 0.0)

    def test_distance(self):
        """Test Euclidean distance."""
        assert Point2D(x=0, y=0).distance_to(Point2D(x=3, y=4)) == 5.0

    def test_rounded_half_up(self):
        """Test that halves round towards positive infinity."""
        assert Point2D(x=2.5, y=-0.5).rounded() == (3, 0)
        assert Point2D(x=2.49, y=1.51).rounded() == (2, 2)

    def test_inside(self):
        """Test the pixel-rectangle check."""
        assert Point2D(x=0, y=0).inside(10, 5)
        assert Point2D(x=9, y=4).inside(10, 5)
        assert not Point2D(x=9.01, y=0).inside(10, 5)
        assert not Point2D(x=0, y=-0.1).inside(10, 5)


class TestCorrespondence:
    """Test Correspondence model."""

    def test_displacement(self):
        """Test the motion between the two points."""
        corr = Correspondence(p1=Point2D(x=1.0, y=2.0), p2=Point2D(x=4.0, y=0.5))
        assert corr.displacement() == (3.0, -1.5)

    def test_round_trip(self):
        """Test dictionary round trip."""
        corr = Correspondence(p1=Point2D(x=1.0, y=2.0), p2=Point2D(x=4.0, y=0.5))
        assert Correspondence.from_dict(corr.to_dict()) == corr
