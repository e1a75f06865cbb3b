"""Heavy-ball SGD and its step learning-rate schedule."""

from dataclasses import dataclass, field
from typing import Dict, Mapping, MutableMapping, Sequence

import numpy as np

from sdtd.models.exceptions import NumericalError


@dataclass
class SgdState:
    """Optimizer state.

    Attributes:
        learning_rate: Current step size
        momentum: Velocity decay in [0, 1)
        velocity: One array per parameter, created lazily
    """

    learning_rate: float
    momentum: float = 0.9
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")


def sgd_momentum_update(
    params: MutableMapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: SgdState,
) -> SgdState:
    """Apply ``v = mu * v - lr * g; theta = theta + v`` to every parameter in place.

    Raises:
        NumericalError: If a gradient holds NaN or Inf; names the tensor
        ValueError: If a gradient's shape differs from its parameter
    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"nonfinite gradient in tensor {name!r}")
    for name, grad in grads.items():
        param = params[name]
        if grad.shape != param.shape:
            raise ValueError(f"gradient {name!r} has shape {grad.shape}, parameter {param.shape}")
        velocity = state.velocity.get(name)
        if velocity is None:
            velocity = np.zeros_like(param)
        velocity = state.momentum * velocity - state.learning_rate * grad
        state.velocity[name] = velocity.astype(param.dtype, copy=False)
        param += state.velocity[name]
    return state


def step_learning_rate(base: float, iteration: int, milestones: Sequence[int], gamma: float) -> float:
    """Rate at ``iteration``: ``base`` times ``gamma`` per milestone reached."""
    drops = sum(1 for m in milestones if iteration >= m)
    return base * gamma ** drops
