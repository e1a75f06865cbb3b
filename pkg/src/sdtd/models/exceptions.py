"""Custom exceptions for sdtd."""


class SdtdError(Exception):
    """Base exception for all sdtd errors."""
    pass


class ConfigError(SdtdError):
    """Raised when a configuration value or command-line usage is invalid."""
    pass


class DataError(SdtdError):
    """Raised when input data is missing, empty or inconsistent."""
    pass


class FormatError(DataError):
    """Raised when an on-disk artifact is corrupt (magic, version, truncation)."""
    pass


class ShapeError(DataError):
    """Raised when array dimensions or model architectures do not match."""
    pass


class GeometryError(SdtdError):
    """Raised when a geometric operation fails."""
    pass


class DegenerateGeometryError(GeometryError):
    """Raised when point configurations admit no unique homography."""
    pass


class ProjectionError(GeometryError):
    """Raised when a homography sends a pixel to the plane at infinity."""
    pass


class NumericalError(SdtdError):
    """Raised when NaN or Inf values are detected."""
    pass
