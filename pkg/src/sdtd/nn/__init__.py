"""A small numpy neural-network engine: CNN layers, LSTM, SGD and gradient checking."""

from sdtd.nn.functional import (
    conv2d_backward,
    conv2d_forward,
    fc_backward,
    fc_forward,
    maxpool2x2_backward,
    maxpool2x2_forward,
    relu_backward,
    relu_forward,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    tanh_phi,
)
from sdtd.nn.gradcheck import check_model, grad_check
from sdtd.nn.layers import parse_layers
from sdtd.nn.lstm import LstmLayer, LstmParams, LstmState, lstm_step
from sdtd.nn.model import CnnRnnModel, dtype_for
from sdtd.nn.optim import SgdState, sgd_momentum_update, step_learning_rate

__all__ = [
    "conv2d_backward",
    "conv2d_forward",
    "fc_backward",
    "fc_forward",
    "maxpool2x2_backward",
    "maxpool2x2_forward",
    "relu_backward",
    "relu_forward",
    "sigmoid",
    "softmax",
    "softmax_cross_entropy",
    "tanh_phi",
    "check_model",
    "grad_check",
    "parse_layers",
    "LstmLayer",
    "LstmParams",
    "LstmState",
    "lstm_step",
    "CnnRnnModel",
    "dtype_for",
    "SgdState",
    "sgd_momentum_update",
    "step_learning_rate",
]
