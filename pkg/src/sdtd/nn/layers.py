"""Parameterised layers and the layer-list parser of the CNN trunk."""

import re
from typing import Dict, List, Optional, Tuple

import numpy as np

from sdtd.models.exceptions import ConfigError, ShapeError
from sdtd.nn import functional as F


def glorot_uniform(
    shape: Tuple[int, ...], fan_in: int, fan_out: int, rng: np.random.Generator, dtype=np.float64
) -> np.ndarray:
    """Uniform initialization in ``+-sqrt(6 / (fan_in + fan_out))``."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base layer: no parameters, identity shape."""

    def __init__(self) -> None:
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self._cache: Optional[F.Cache] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        return input_shape


class Conv2D(Layer):
    """Square stride-1 convolution with same padding."""

    def __init__(self, in_channels: int, out_channels: int, size: int, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.pad = size // 2
        self.params["weight"] = glorot_uniform(
            (out_channels, in_channels, size, size),
            in_channels * size * size,
            out_channels * size * size,
            rng,
            dtype,
        )
        self.params["bias"] = np.zeros(out_channels, dtype=dtype)

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, self._cache = F.conv2d_forward(x, self.params["weight"], self.params["bias"], 1, self.pad)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx, self.grads["weight"], self.grads["bias"] = F.conv2d_backward(dy, self._cache)
        return dx

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        channels, height, width = input_shape
        size = self.params["weight"].shape[2]
        return (
            self.params["weight"].shape[0],
            height + 2 * self.pad - size + 1,
            width + 2 * self.pad - size + 1,
        )


class ReLU(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        y, self._cache = F.relu_forward(x)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return F.relu_backward(dy, self._cache)


class MaxPool2x2(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        y, self._cache = F.maxpool2x2_forward(x)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return F.maxpool2x2_backward(dy, self._cache)

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        channels, height, width = input_shape
        return (channels, (height + 1) // 2, (width + 1) // 2)


class Flatten(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = {"shape": x.shape}
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy.reshape(self._cache["shape"])

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        return (int(np.prod(input_shape)),)


class Dense(Layer):
    """Fully connected layer with (out, in) weights."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.params["weight"] = glorot_uniform((out_features, in_features), in_features, out_features, rng, dtype)
        self.params["bias"] = np.zeros(out_features, dtype=dtype)

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, self._cache = F.fc_forward(x, self.params["weight"], self.params["bias"])
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx, self.grads["weight"], self.grads["bias"] = F.fc_backward(dy, self._cache)
        return dx

    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        return (self.params["weight"].shape[0],)


_CONV = re.compile(r"^conv(\d+)x(\d+)x(\d+)$")
_FC = re.compile(r"^fc(\d+)$")


def parse_layers(
    spec: str, input_shape: Tuple[int, int, int], rng: np.random.Generator, dtype=np.float64
) -> Tuple[List[Layer], int]:
    """Build a CNN trunk from a comma-separated layer list.

    Kinds are ``convKxKxN``, ``relu``, ``pool`` and ``fcN``. A flatten is
    inserted before the first ``fc`` (or at the end when there is none), so
    the trunk always emits a feature vector.

    Args:
        spec: Layer list, for example ``"conv3x3x16,relu,pool,fc128"``
        input_shape: (C, H, W) of one input image
        rng: Initialization generator
        dtype: Parameter dtype

    Returns:
        Layers and the feature size they produce

    Raises:
        ConfigError: On an unknown layer kind
        ShapeError: If a layer does not fit the running shape
    """
    layers: List[Layer] = []
    shape: Tuple[int, ...] = tuple(input_shape)
    flat = False
    for token in (t.strip() for t in spec.split(",") if t.strip()):
        conv, fc = _CONV.match(token), _FC.match(token)
        if conv:
            if flat:
                raise ShapeError(f"{token} after a dense layer")
            kh, kw, out = (int(g) for g in conv.groups())
            if kh != kw or kh % 2 == 0:
                raise ConfigError(f"{token}: kernels must be square with odd size")
            layer: Layer = Conv2D(shape[0], out, kh, rng, dtype)
        elif token == "relu":
            layer = ReLU()
        elif token == "pool":
            if flat:
                raise ShapeError("pool after a dense layer")
            layer = MaxPool2x2()
        elif fc:
            if not flat:
                flatten = Flatten()
                layers.append(flatten)
                shape = flatten.output_shape(shape)
                flat = True
            layer = Dense(shape[0], int(fc.group(1)), rng, dtype)
        else:
            raise ConfigError(f"unknown layer kind {token!r}")
        layers.append(layer)
        shape = layer.output_shape(shape)
    if not flat:
        flatten = Flatten()
        layers.append(flatten)
        shape = flatten.output_shape(shape)
    return layers, int(shape[0])
