"""Homography model for planar projective transformations between frames."""

from typing import List, Tuple

import numpy as np
from pydantic import field_validator, model_validator

from sdtd.models.base import SdtdModel
from sdtd.models.exceptions import DegenerateGeometryError, ProjectionError
from sdtd.models.validators import validate_finite_number

# |w| below this is treated as a point at infinity
INFINITY_EPS = 1e-12

Row = Tuple[float, float, float]


class Homography(SdtdModel):
    """A 3x3 projective transform mapping frame t pixels to frame t+1.

    The matrix is stored row-major and always normalized so that the bottom
    right entry is 1:

        [h00 h01 h02]
        [h10 h11 h12]
        [h20 h21  1 ]

    A point (x, y) maps to (x', y') = (h0 . p / h2 . p, h1 . p / h2 . p)
    with p = (x, y, 1).

    Attributes:
        rows: The three matrix rows
    """

    rows: Tuple[Row, Row, Row] = (
        (1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, 0.0, 1.0),
    )

    @field_validator("rows")
    @classmethod
    def validate_entries(cls, value: Tuple[Row, Row, Row]) -> Tuple[Row, Row, Row]:
        """Validate that every matrix entry is finite."""
        for i, row in enumerate(value):
            for j, entry in enumerate(row):
                validate_finite_number(entry, f"h[{i}][{j}]")
        return value

    @model_validator(mode="after")
    def validate_normalized(self) -> "Homography":
        """Validate h[2][2] == 1 and a nonzero determinant."""
        if self.rows[2][2] != 1.0:
            raise ValueError(f"h[2][2] must be 1 after normalization, got {self.rows[2][2]}")
        if abs(float(np.linalg.det(self.to_array()))) < 1e-12:
            raise ValueError("Homography is singular (determinant is zero)")
        return self

    @classmethod
    def identity(cls) -> "Homography":
        """Create the identity homography."""
        return cls()

    @classmethod
    def translation(cls, tx: float, ty: float) -> "Homography":
        """Create a pure translation by (tx, ty)."""
        return cls(rows=((1.0, 0.0, float(tx)), (0.0, 1.0, float(ty)), (0.0, 0.0, 1.0)))

    @classmethod
    def from_array(cls, matrix: np.ndarray) -> "Homography":
        """Create a normalized homography from any nonzero-scale 3x3 array.

        Args:
            matrix: 3x3 array, defined up to scale

        Returns:
            Homography with h[2][2] = 1

        Raises:
            ValueError: If the array is not 3x3
            DegenerateGeometryError: If h[2][2] is zero or the matrix is singular
        """
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (3, 3):
            raise ValueError(f"Homography must be 3x3, got shape {matrix.shape}")
        if abs(matrix[2, 2]) < INFINITY_EPS or not np.all(np.isfinite(matrix)):
            raise DegenerateGeometryError("degenerate geometry: cannot normalize h[2][2]")
        normalized = matrix / matrix[2, 2]
        normalized[2, 2] = 1.0
        if abs(np.linalg.det(normalized)) < 1e-12:
            raise DegenerateGeometryError("degenerate geometry: singular homography")
        rows = tuple(tuple(float(v) for v in row) for row in normalized)
        return cls(rows=rows)  # type: ignore[arg-type]

    def to_array(self) -> np.ndarray:
        """Get the matrix as a float64 array."""
        return np.array(self.rows, dtype=np.float64)

    def to_matrix(self) -> List[List[float]]:
        """Get the matrix as nested lists."""
        return [list(row) for row in self.rows]

    def determinant(self) -> float:
        """Calculate the determinant of the matrix."""
        return float(np.linalg.det(self.to_array()))

    def is_identity(self, tol: float = 0.0) -> bool:
        """Check whether this is the identity within ``tol`` per entry."""
        return bool(np.all(np.abs(self.to_array() - np.eye(3)) <= tol))

    def inverse(self) -> "Homography":
        """Get the inverse homography (maps frame t+1 back to frame t)."""
        return Homography.from_array(np.linalg.inv(self.to_array()))

    def __matmul__(self, other: "Homography") -> "Homography":
        """Compose two homographies; ``(a @ b)`` applies ``b`` first."""
        return Homography.from_array(self.to_array() @ other.to_array())

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        """Map an (N, 2) array of (x, y) points through the homography.

        Args:
            points: Array of shape (N, 2)

        Returns:
            Array of shape (N, 2) with dehomogenized mapped points

        Raises:
            ProjectionError: If any point maps to the plane at infinity
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        h = self.to_array()
        x, y = points[:, 0], points[:, 1]
        w = h[2, 0] * x + h[2, 1] * y + h[2, 2]
        if np.any(np.abs(w) < INFINITY_EPS):
            raise ProjectionError("homography maps pixel to infinity")
        xp = (h[0, 0] * x + h[0, 1] * y + h[0, 2]) / w
        yp = (h[1, 0] * x + h[1, 1] * y + h[1, 2]) / w
        return np.stack([xp, yp], axis=1)

    def __str__(self) -> str:
        return "Homography(" + "; ".join(" ".join(f"{v:.6g}" for v in row) for row in self.rows) + ")"
