#!/usr/bin/python3
"""This module implements the squeeze-excitation channel gate."""
from typing import Mapping

from botkit.errors import ParameterError
from botkit.tensor import (
    Tensor,
    activation,
    global_avg_pool,
    matmul,
    mul,
    reshape,
    transpose,
)
from .params import se_width

def se_gate(x: Tensor, params: Mapping[str, Tensor], ratio: int = 16, kind: str = 'relu') -> Tensor:
    """This function rescales channels by s = sigmoid(W2 act(W1 pool(x))).

    Args:
        x:
            Tensor[N, C, H, W].

        params:
            'w1' [max(1, C/ratio), C] and 'w2' [C, max(1, C/ratio)].

        ratio:
            Reduction ratio.

        kind:
            Hidden activation.

    Returns:
        Tensor shaped like x.
    """
    n, channels = x.shape[0], x.shape[1]
    reduced = se_width(channels, ratio)
    w1, w2 = params['w1'], params['w2']
    if w1.shape != (reduced, channels) or w2.shape != (channels, reduced):
        raise ParameterError(f'SE weights {w1.shape}, {w2.shape} do not fit {channels} channels at ratio {ratio}')

    hidden = activation(matmul(global_avg_pool(x), transpose(w1, (1, 0))), kind)
    gate = activation(matmul(hidden, transpose(w2, (1, 0))), 'sigmoid')
    return mul(x, reshape(gate, (n, channels, 1, 1)))
