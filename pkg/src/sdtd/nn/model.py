"""The CNN-RNN joint model: a CNN per step feeding stacked LSTMs and a softmax head."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from sdtd import videoio
from sdtd.models.configs import ArchitectureConfig, Precision
from sdtd.models.exceptions import ShapeError
from sdtd.nn import functional as F
from sdtd.nn.layers import Dense, Layer, parse_layers
from sdtd.nn.lstm import LstmLayer, LstmParams

logger = logging.getLogger(__name__)


def dtype_for(precision: Union[Precision, str]) -> type:
    """Map a precision setting to its numpy dtype."""
    return np.float64 if Precision(precision) == Precision.FLOAT64 else np.float32


class CnnRnnModel:
    """Per-step CNN features, LSTM recurrence from a zero state, per-step softmax.

    A second linear head on the CNN features (``head_cnn``) serves the
    CNN-only phase of two-phase training; it is not used by :meth:`forward`.

    Args:
        input_shape: (C, H, W) of one step's image
        num_classes: Number of output classes
        arch: Topology
        seed: Initialization seed
        dtype: Parameter and activation dtype
    """

    def __init__(
        self,
        input_shape: Tuple[int, int, int],
        num_classes: int,
        arch: Optional[ArchitectureConfig] = None,
        seed: int = 0,
        dtype=np.float64,
    ):
        if num_classes < 1:
            raise ShapeError(f"num_classes must be >= 1, got {num_classes}")
        self.arch = arch or ArchitectureConfig()
        self.input_shape = tuple(int(s) for s in input_shape)
        self.dtype = np.dtype(dtype)
        self._num_classes = int(num_classes)
        rng = np.random.default_rng(seed)
        self.cnn, self.feature_size = parse_layers(self.arch.layers, self.input_shape, rng, self.dtype)
        self.lstms: List[LstmLayer] = []
        width = self.feature_size
        for _ in range(self.arch.lstm_layers):
            params = LstmParams.initialize(width, self.arch.lstm_hidden, rng, self.arch.forget_bias, self.dtype)
            self.lstms.append(LstmLayer(params))
            width = self.arch.lstm_hidden
        self.head = Dense(width, self._num_classes, rng, self.dtype)
        self.head_cnn = Dense(self.feature_size, self._num_classes, rng, self.dtype)

    @property
    def num_classes(self) -> int:
        return self._num_classes

    # ------------------------------------------------------------ parameters

    def _named_layers(self) -> List[Tuple[str, Layer]]:
        named = [(f"cnn.{i}", layer) for i, layer in enumerate(self.cnn) if layer.params]
        return named + [("head", self.head), ("head_cnn", self.head_cnn)]

    def parameters(self) -> Dict[str, np.ndarray]:
        """Every trainable tensor by name; arrays are shared, not copied."""
        params: Dict[str, np.ndarray] = {}
        for prefix, layer in self._named_layers():
            for key, value in layer.params.items():
                params[f"{prefix}.{key}"] = value
        for j, lstm in enumerate(self.lstms):
            for key, value in lstm.params.as_dict().items():
                params[f"lstm.{j}.{key}"] = value
        return params

    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: tuple(value.shape) for name, value in self.parameters().items()}

    def _collect_grads(self, cnn_only: bool) -> Dict[str, np.ndarray]:
        grads: Dict[str, np.ndarray] = {}
        for prefix, layer in self._named_layers():
            if (prefix == "head_cnn") != cnn_only and not prefix.startswith("cnn."):
                continue
            for key, value in layer.grads.items():
                grads[f"{prefix}.{key}"] = value
        if not cnn_only:
            for j, lstm in enumerate(self.lstms):
                for key, value in lstm.grads.items():
                    grads[f"lstm.{j}.{key}"] = value
        return grads

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Copies of every parameter."""
        return {name: value.copy() for name, value in self.parameters().items()}

    def load_state_dict(self, tensors: Dict[str, np.ndarray]) -> None:
        """Overwrite parameters in place.

        Raises:
            ShapeError: If a tensor is missing, unknown or misshaped
        """
        videoio.check_tensor_shapes(tensors, self.parameter_shapes())
        params = self.parameters()
        for name, value in tensors.items():
            params[name][...] = value.astype(self.dtype, copy=False)

    def save(self, path: Union[str, Path]) -> Path:
        return videoio.save_checkpoint(self.parameters(), path)

    def load(self, path: Union[str, Path]) -> None:
        """Load weights saved by :meth:`save` into this architecture."""
        self.load_state_dict(videoio.load_checkpoint(path, self.parameter_shapes()))
        logger.debug("Loaded %d tensors from %s", len(self.parameters()), path)

    # ------------------------------------------------------------ forward/backward

    def _check_clips(self, clips: np.ndarray) -> np.ndarray:
        clips = np.asarray(clips)
        if clips.ndim != 5 or tuple(clips.shape[2:]) != self.input_shape:
            raise ShapeError(
                f"clips of shape {clips.shape} do not match model input (N, T) + {self.input_shape}"
            )
        return clips.astype(self.dtype, copy=False)

    def _features(self, clips: np.ndarray) -> np.ndarray:
        n, t_steps = clips.shape[:2]
        x = clips.reshape((n * t_steps,) + self.input_shape)
        for layer in self.cnn:
            x = layer.forward(x)
        return x

    def _features_backward(self, d_features: np.ndarray) -> None:
        for layer in reversed(self.cnn):
            d_features = layer.backward(d_features)

    def forward(self, clips: np.ndarray, cnn_only: bool = False) -> np.ndarray:
        """Per-step logits.

        Args:
            clips: (N, T, C, H, W) inputs
            cnn_only: Use the CNN head instead of the recurrent path

        Returns:
            (N, T, K) logits

        Raises:
            ShapeError: If the clips do not fit the architecture
        """
        clips = self._check_clips(clips)
        n, t_steps = clips.shape[:2]
        features = self._features(clips)
        if cnn_only:
            return self.head_cnn.forward(features).reshape(n, t_steps, -1)
        hidden = features.reshape(n, t_steps, -1)
        for lstm in self.lstms:
            hidden = lstm.forward(hidden)
        logits = self.head.forward(hidden.reshape(n * t_steps, -1))
        return logits.reshape(n, t_steps, -1)

    def predict(self, clips: np.ndarray) -> np.ndarray:
        """Per-step class probabilities, (N, T, K)."""
        return F.softmax(self.forward(clips))

    def loss_and_grads(
        self, clips: np.ndarray, labels: np.ndarray, cnn_only: bool = False
    ) -> Tuple[float, Dict[str, np.ndarray]]:
        """Cross-entropy of every step against its clip label, averaged over N*T.

        Returns:
            Loss and gradients of the parameters on the active path

        Raises:
            ShapeError: On clip/label mismatch
            ValueError: If a label is outside [0, num_classes)
        """
        clips = self._check_clips(clips)
        labels = np.asarray(labels, dtype=np.int64)
        n, t_steps = clips.shape[:2]
        if labels.shape != (n,):
            raise ShapeError(f"{labels.shape} labels for {n} clips")
        logits = self.forward(clips, cnn_only=cnn_only)
        loss, d_logits = F.softmax_cross_entropy(logits.reshape(n * t_steps, -1), np.repeat(labels, t_steps))
        if cnn_only:
            self._features_backward(self.head_cnn.backward(d_logits))
        else:
            d_hidden = self.head.backward(d_logits).reshape(n, t_steps, -1)
            for lstm in reversed(self.lstms):
                d_hidden = lstm.backward(d_hidden)
            self._features_backward(d_hidden.reshape(n * t_steps, -1))
        return loss, self._collect_grads(cnn_only)

    def loss(self, clips: np.ndarray, labels: np.ndarray, cnn_only: bool = False) -> float:
        labels = np.asarray(labels, dtype=np.int64)
        logits = self.forward(clips, cnn_only=cnn_only)
        n, t_steps = logits.shape[:2]
        loss, _ = F.softmax_cross_entropy(logits.reshape(n * t_steps, -1), np.repeat(labels, t_steps))
        return loss
