"""Point2D and Correspondence models for 2D image coordinates."""

import math
from typing import Tuple

from pydantic import field_validator

from sdtd.models.base import SdtdModel
from sdtd.models.validators import validate_finite_number


class Point2D(SdtdModel):
    """A point in image coordinates (x to the right, y downwards).

    Attributes:
        x: Column coordinate in pixels
        y: Row coordinate in pixels
    """

    x: float
    y: float

    @field_validator("x", "y")
    @classmethod
    def validate_coordinate(cls, value: float, info) -> float:
        """Validate that coordinates are finite numbers."""
        return validate_finite_number(value, info.field_name)

    @classmethod
    def origin(cls) -> "Point2D":
        """Create a point at the origin (0, 0)."""
        return cls(x=0.0, y=0.0)

    def __str__(self) -> str:
        return f"Point2D({self.x}, {self.y})"

    def __repr__(self) -> str:
        return f"Point2D(x={self.x}, y={self.y})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Point2D):
            return False
        return self.x == other.x and self.y == other.y

    def __hash__(self) -> int:
        return hash((self.x, self.y))

    def __add__(self, other: "Point2D") -> "Point2D":
        return Point2D(x=self.x + other.x, y=self.y + other.y)

    def __sub__(self, other: "Point2D") -> "Point2D":
        return Point2D(x=self.x - other.x, y=self.y - other.y)

    def as_tuple(self) -> Tuple[float, float]:
        """Get point as an (x, y) tuple."""
        return (self.x, self.y)

    def rounded(self) -> Tuple[int, int]:
        """Get the nearest pixel as (column, row), rounding halves up."""
        return (int(math.floor(self.x + 0.5)), int(math.floor(self.y + 0.5)))

    def distance_to(self, other: "Point2D") -> float:
        """Calculate Euclidean distance to another point."""
        return math.hypot(self.x - other.x, self.y - other.y)

    def translate(self, dx: float, dy: float) -> "Point2D":
        """Translate the point by given amounts."""
        return Point2D(x=self.x + dx, y=self.y + dy)

    def inside(self, width: int, height: int) -> bool:
        """Check whether the point lies in the pixel rectangle [0, W-1] x [0, H-1]."""
        return 0.0 <= self.x <= width - 1 and 0.0 <= self.y <= height - 1


class Correspondence(SdtdModel):
    """A matched point pair between frame t and frame t+1.

    Attributes:
        p1: Position in frame t
        p2: Position in frame t+1
    """

    p1: Point2D
    p2: Point2D

    def displacement(self) -> Tuple[float, float]:
        """Get the (dx, dy) motion from p1 to p2."""
        return (self.p2.x - self.p1.x, self.p2.y - self.p1.y)
