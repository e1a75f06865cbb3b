"""Activation functions and layer kernels with their exact gradients.

Image tensors are NCHW, convolution kernels OIHW and dense weights
(out, in). Every ``*_forward`` returns its output plus a cache that the
matching ``*_backward`` consumes.
"""

from typing import Any, Dict, Tuple

import numpy as np

from sdtd.models.exceptions import ShapeError

Cache = Dict[str, Any]


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function ``1 / (1 + exp(-x))``, stable for any finite input."""
    x = np.asarray(x)
    out = np.empty_like(x, dtype=np.result_type(x, np.float32))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    with np.errstate(under="ignore"):
        e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def tanh_phi(x: np.ndarray) -> np.ndarray:
    """Hyperbolic tangent, equal to ``2 * sigmoid(2x) - 1``."""
    return np.tanh(x)


def relu_forward(x: np.ndarray) -> Tuple[np.ndarray, Cache]:
    return np.maximum(x, 0), {"x": x}


def relu_backward(dy: np.ndarray, cache: Cache) -> np.ndarray:
    return dy * (cache["x"] > 0)


def conv2d_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1, pad: int = 0
) -> Tuple[np.ndarray, Cache]:
    """2-D cross-correlation.

    Args:
        x: Input (N, C, H, W)
        w: Kernels (O, C, KH, KW)
        b: Bias (O,)
        stride: Step between output positions
        pad: Zero padding on every side

    Returns:
        Output (N, O, HO, WO) and cache

    Raises:
        ShapeError: On channel mismatch or a kernel larger than the input
    """
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv input {x.shape} does not match kernel {w.shape}")
    n, _, height, width = x.shape
    out_ch, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    ho = (height + 2 * pad - kh) // stride + 1
    wo = (width + 2 * pad - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {height}x{width}")
    y = np.zeros((out_ch, n, ho, wo), dtype=np.result_type(x, w))
    for a in range(kh):
        for c in range(kw):
            patch = xp[:, :, a : a + stride * ho : stride, c : c + stride * wo : stride]
            y += np.tensordot(w[:, :, a, c], patch, axes=([1], [1]))
    y = y.transpose(1, 0, 2, 3) + b.reshape(1, -1, 1, 1)
    return np.ascontiguousarray(y), {"xp": xp, "w": w, "stride": stride, "pad": pad, "x_shape": x.shape}


def conv2d_backward(dy: np.ndarray, cache: Cache) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of :func:`conv2d_forward` as (dx, dw, db)."""
    xp, w, stride, pad = cache["xp"], cache["w"], cache["stride"], cache["pad"]
    _, _, kh, kw = w.shape
    _, _, ho, wo = dy.shape
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for a in range(kh):
        for c in range(kw):
            rows = slice(a, a + stride * ho, stride)
            cols = slice(c, c + stride * wo, stride)
            dw[:, :, a, c] = np.tensordot(dy, xp[:, :, rows, cols], axes=([0, 2, 3], [0, 2, 3]))
            dxp[:, :, rows, cols] += np.tensordot(dy, w[:, :, a, c], axes=([1], [0])).transpose(0, 3, 1, 2)
    db = dy.sum(axis=(0, 2, 3))
    height, width = cache["x_shape"][2:]
    dx = dxp[:, :, pad : pad + height, pad : pad + width] if pad else dxp
    return dx, dw, db


def maxpool2x2_forward(x: np.ndarray) -> Tuple[np.ndarray, Cache]:
    """2x2 max pooling with stride 2; odd extents are padded with -inf."""
    n, ch, height, width = x.shape
    ph, pw = height % 2, width % 2
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (0, ph), (0, pw)), constant_values=-np.inf)
    ho, wo = x.shape[2] // 2, x.shape[3] // 2
    windows = x.reshape(n, ch, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, ch, ho, wo, 4)
    index = windows.argmax(axis=-1)
    y = np.take_along_axis(windows, index[..., np.newaxis], axis=-1)[..., 0]
    return y, {"index": index, "shape": (n, ch, height, width)}


def maxpool2x2_backward(dy: np.ndarray, cache: Cache) -> np.ndarray:
    """Route each output gradient to the input that held the maximum."""
    n, ch, height, width = cache["shape"]
    index = cache["index"]
    ho, wo = index.shape[2:]
    windows = np.zeros((n, ch, ho, wo, 4), dtype=dy.dtype)
    np.put_along_axis(windows, index[..., np.newaxis], dy[..., np.newaxis], axis=-1)
    dx = windows.reshape(n, ch, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, ch, 2 * ho, 2 * wo)
    return np.ascontiguousarray(dx[:, :, :height, :width])


def fc_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, Cache]:
    """Dense layer ``x @ w.T + b`` for x of shape (N, in)."""
    if x.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"dense input {x.shape} does not match weight {w.shape}")
    return x @ w.T + b, {"x": x, "w": w}


def fc_backward(dy: np.ndarray, cache: Cache) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of :func:`fc_forward` as (dx, dw, db)."""
    return dy @ cache["w"], dy.T @ cache["x"], dy.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with max subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy ``-log p[label]`` over a batch.

    Args:
        logits: (N, K) scores
        labels: (N,) integer classes

    Returns:
        Loss and its gradient with respect to ``logits``

    Raises:
        ValueError: If a label is outside [0, K)
    """
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"{labels.shape[0]} labels for {n} rows of logits")
    if np.any(labels < 0) or np.any(labels >= k):
        raise ValueError(f"label out of range [0, {k})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(n), labels].mean())
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n
