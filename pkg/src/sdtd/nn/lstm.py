"""LSTM unit without peephole connections, and a sequence layer with BPTT.

One step computes::

    i = sigmoid(W_xi x + W_hi h + b_i)
    f = sigmoid(W_xf x + W_hf h + b_f)
    c = f * c_prev + i * tanh(W_xc x + W_hc h + b_c)
    o = sigmoid(W_xo x + W_ho h + b_o)
    h = o * tanh(c)
"""

from dataclasses import dataclass, fields
from typing import Dict, List, Optional, Tuple

import numpy as np

from sdtd.models.exceptions import ShapeError
from sdtd.nn.functional import sigmoid, tanh_phi
from sdtd.nn.layers import glorot_uniform

GATES = ("i", "f", "c", "o")


@dataclass
class LstmParams:
    """Weights and biases of every gate.

    ``W_x*`` are (hidden, input), ``W_h*`` are (hidden, hidden) and ``b_*``
    have length hidden.
    """

    W_xi: np.ndarray
    W_hi: np.ndarray
    b_i: np.ndarray
    W_xf: np.ndarray
    W_hf: np.ndarray
    b_f: np.ndarray
    W_xc: np.ndarray
    W_hc: np.ndarray
    b_c: np.ndarray
    W_xo: np.ndarray
    W_ho: np.ndarray
    b_o: np.ndarray

    def __post_init__(self) -> None:
        hidden, inputs = self.W_xi.shape
        for gate in GATES:
            expected = {
                f"W_x{gate}": (hidden, inputs),
                f"W_h{gate}": (hidden, hidden),
                f"b_{gate}": (hidden,),
            }
            for name, shape in expected.items():
                actual = getattr(self, name).shape
                if actual != shape:
                    raise ShapeError(f"{name} has shape {actual}, expected {shape}")

    @property
    def input_dim(self) -> int:
        return int(self.W_xi.shape[1])

    @property
    def hidden_dim(self) -> int:
        return int(self.W_xi.shape[0])

    @classmethod
    def initialize(
        cls,
        input_dim: int,
        hidden_dim: int,
        rng: np.random.Generator,
        forget_bias: float = 1.0,
        dtype=np.float64,
    ) -> "LstmParams":
        """Glorot-uniform weights, zero biases except ``b_f = forget_bias``."""
        values = {}
        for gate in GATES:
            values[f"W_x{gate}"] = glorot_uniform((hidden_dim, input_dim), input_dim, hidden_dim, rng, dtype)
            values[f"W_h{gate}"] = glorot_uniform((hidden_dim, hidden_dim), hidden_dim, hidden_dim, rng, dtype)
            values[f"b_{gate}"] = np.zeros(hidden_dim, dtype=dtype)
        values["b_f"][:] = forget_bias
        return cls(**values)

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int, dtype=np.float64) -> "LstmParams":
        values = {}
        for gate in GATES:
            values[f"W_x{gate}"] = np.zeros((hidden_dim, input_dim), dtype=dtype)
            values[f"W_h{gate}"] = np.zeros((hidden_dim, hidden_dim), dtype=dtype)
            values[f"b_{gate}"] = np.zeros(hidden_dim, dtype=dtype)
        return cls(**values)

    def as_dict(self) -> Dict[str, np.ndarray]:
        """Name to array, sharing memory with the parameters."""
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class LstmState:
    """Hidden output ``h`` and memory cell ``c``; vectors or (N, hidden)."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int, batch: Optional[int] = None, dtype=np.float64) -> "LstmState":
        shape = (hidden_dim,) if batch is None else (batch, hidden_dim)
        return cls(np.zeros(shape, dtype=dtype), np.zeros(shape, dtype=dtype))


def _gate_inputs(x: np.ndarray, h: np.ndarray, p: LstmParams, gate: str) -> np.ndarray:
    return x @ getattr(p, f"W_x{gate}").T + h @ getattr(p, f"W_h{gate}").T + getattr(p, f"b_{gate}")


def lstm_step_full(
    x: np.ndarray, prev: LstmState, p: LstmParams
) -> Tuple[LstmState, Dict[str, np.ndarray]]:
    """One step, also returning gate activations ``i``, ``f``, ``g``, ``o``."""
    if x.shape[-1] != p.input_dim or prev.h.shape[-1] != p.hidden_dim:
        raise ShapeError(
            f"input {x.shape} / state {prev.h.shape} do not fit LSTM {p.input_dim}->{p.hidden_dim}"
        )
    i = sigmoid(_gate_inputs(x, prev.h, p, "i"))
    f = sigmoid(_gate_inputs(x, prev.h, p, "f"))
    g = tanh_phi(_gate_inputs(x, prev.h, p, "c"))
    o = sigmoid(_gate_inputs(x, prev.h, p, "o"))
    c = f * prev.c + i * g
    h = o * tanh_phi(c)
    assert np.all((i >= 0) & (i <= 1)) and np.all((f >= 0) & (f <= 1)) and np.all((o >= 0) & (o <= 1))
    assert np.all(np.abs(h) <= 1)
    return LstmState(h, c), {"i": i, "f": f, "g": g, "o": o}


def lstm_step(x: np.ndarray, prev: LstmState, p: LstmParams) -> LstmState:
    """Advance the unit by one input.

    Args:
        x: Input of length ``input_dim`` (or a batch of them)
        prev: Previous state
        p: Parameters

    Returns:
        New state

    Raises:
        ShapeError: On dimension mismatch
    """
    state, _ = lstm_step_full(x, prev, p)
    return state


class LstmLayer:
    """An LSTM run over (N, T, D) sequences from a zero initial state."""

    def __init__(self, params: LstmParams):
        self.params = params
        self.grads: Dict[str, np.ndarray] = {}
        self._steps: List[Dict[str, np.ndarray]] = []

    def forward(self, xs: np.ndarray) -> np.ndarray:
        n, t_steps, _ = xs.shape
        dtype = self.params.W_xi.dtype
        state = LstmState.zeros(self.params.hidden_dim, n, dtype)
        outputs = np.empty((n, t_steps, self.params.hidden_dim), dtype=dtype)
        self._steps = []
        for t in range(t_steps):
            new, gates = lstm_step_full(xs[:, t], state, self.params)
            gates.update(x=xs[:, t], h_prev=state.h, c_prev=state.c, c=new.c)
            self._steps.append(gates)
            outputs[:, t] = new.h
            state = new
        return outputs

    def backward(self, dhs: np.ndarray) -> np.ndarray:
        """Backpropagate through time.

        Args:
            dhs: Loss gradient with respect to every output, (N, T, hidden)

        Returns:
            Gradient with respect to the inputs, (N, T, D)
        """
        p = self.params
        grads = {name: np.zeros_like(value) for name, value in p.as_dict().items()}
        n, t_steps, _ = dhs.shape
        dxs = np.empty((n, t_steps, p.input_dim), dtype=dhs.dtype)
        dh_next = np.zeros((n, p.hidden_dim), dtype=dhs.dtype)
        dc_next = np.zeros_like(dh_next)
        for t in range(t_steps - 1, -1, -1):
            s = self._steps[t]
            i, f, g, o = s["i"], s["f"], s["g"], s["o"]
            tanh_c = tanh_phi(s["c"])
            dh = dhs[:, t] + dh_next
            dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next
            pre = {
                "i": dc * g * i * (1.0 - i),
                "f": dc * s["c_prev"] * f * (1.0 - f),
                "c": dc * i * (1.0 - g * g),
                "o": dh * tanh_c * o * (1.0 - o),
            }
            dx = np.zeros((n, p.input_dim), dtype=dhs.dtype)
            dh_next = np.zeros_like(dh)
            for gate, da in pre.items():
                grads[f"W_x{gate}"] += da.T @ s["x"]
                grads[f"W_h{gate}"] += da.T @ s["h_prev"]
                grads[f"b_{gate}"] += da.sum(axis=0)
                dx += da @ getattr(p, f"W_x{gate}")
                dh_next += da @ getattr(p, f"W_h{gate}")
            dc_next = dc * f
            dxs[:, t] = dx
        self.grads = grads
        return dxs
