"""Protocol definitions for sdtd."""

from typing import TYPE_CHECKING, Protocol, runtime_checkable

import numpy as np

if TYPE_CHECKING:
    from sdtd.flow import FlowField
    from sdtd.frames import Frame


@runtime_checkable
class FlowSolver(Protocol):
    """Anything that computes a dense flow field between two grayscale frames.

    Both solvers in :mod:`sdtd.flow` satisfy this through
    :func:`sdtd.flow.make_solver`; tests substitute ground-truth solvers.
    """

    def __call__(self, f1: "Frame", f2: "Frame") -> "FlowField":
        """Compute flow mapping ``f1`` pixels to their position in ``f2``.

        Args:
            f1: Grayscale frame t
            f2: Grayscale frame t+1

        Returns:
            FlowField: Per-pixel displacement in pixels/frame
        """
        ...


@runtime_checkable
class StreamModel(Protocol):
    """A recognizer that maps clips to per-step class probabilities.

    :class:`sdtd.nn.model.CnnRnnModel` is the trained implementation;
    evaluation also accepts oracle and constant models through this
    interface.
    """

    @property
    def num_classes(self) -> int:
        """Number of output classes."""
        ...

    def predict(self, clips: np.ndarray) -> np.ndarray:
        """Predict per-step probabilities.

        Args:
            clips: Array of shape (N, T, C, H, W)

        Returns:
            np.ndarray: Probabilities of shape (N, T, K), rows on the simplex
        """
        ...
