"""Central finite-difference verification of analytic gradients."""

import logging
from typing import Callable, Dict, Mapping, Optional

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-5
DEFAULT_SAMPLES = 200
DENOMINATOR_FLOOR = 1e-5


def relative_error(analytic: float, numeric: float) -> float:
    """``|a - n| / max(|a|, |n|, floor)``."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), DENOMINATOR_FLOOR)


def grad_check(
    loss_fn: Callable[[], float],
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    eps: float = DEFAULT_EPS,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    per_tensor: Optional[Dict[str, float]] = None,
) -> float:
    """Compare analytic gradients with central differences.

    Each tensor in ``grads`` is checked at ``samples`` random coordinates
    (all of them when it is smaller). Parameters are perturbed in place and
    restored.

    Args:
        loss_fn: Recomputes the loss from the current parameters
        params: Tensors named as in ``grads``, float64
        grads: Analytic gradients at the current parameters
        eps: Perturbation
        samples: Coordinates per tensor
        seed: Coordinate sampling seed
        per_tensor: Filled with the maximum error of each tensor when given

    Returns:
        Maximum relative error over all checked coordinates

    Raises:
        TypeError: If a parameter is not float64
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in sorted(grads):
        param = params[name]
        if param.dtype != np.float64:
            raise TypeError(f"grad_check needs float64 parameters, {name!r} is {param.dtype}")
        flat = param.reshape(-1)
        grad = np.asarray(grads[name]).reshape(-1)
        if flat.size <= samples:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, size=samples, replace=False)
        tensor_worst = 0.0
        for index in coords:
            original = flat[index]
            flat[index] = original + eps
            plus = loss_fn()
            flat[index] = original - eps
            minus = loss_fn()
            flat[index] = original
            numeric = (plus - minus) / (2.0 * eps)
            tensor_worst = max(tensor_worst, relative_error(float(grad[index]), numeric))
        if per_tensor is not None:
            per_tensor[name] = tensor_worst
        logger.debug("grad_check %s: max relative error %.3e over %d coords", name, tensor_worst, len(coords))
        worst = max(worst, tensor_worst)
    return worst


def check_model(
    model,
    clips: np.ndarray,
    labels: np.ndarray,
    eps: float = DEFAULT_EPS,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    cnn_only: bool = False,
    per_tensor: Optional[Dict[str, float]] = None,
) -> float:
    """Run :func:`grad_check` on the full loss of a :class:`CnnRnnModel`."""
    _, grads = model.loss_and_grads(clips, labels, cnn_only=cnn_only)
    grads = {name: value.copy() for name, value in grads.items()}
    return grad_check(
        lambda: model.loss(clips, labels, cnn_only=cnn_only),
        model.parameters(),
        grads,
        eps=eps,
        samples=samples,
        seed=seed,
        per_tensor=per_tensor,
    )
