#!/usr/bin/python3
"""This module implements the BoT block: a bottleneck whose 3x3 convolution is
replaced by multi-head self-attention, with BN and activation kept after it. A
strided block attends at full resolution and then average-pools 2x2."""
from typing import Mapping

from botkit.attention import MHSAParams, mhsa2d
from botkit.errors import ConfigurationError
from botkit.schema import BlockSpec
from botkit.tensor import Tensor, activation, avg_pool2d, conv2d
from .bottleneck import batchnorm, check_channels, residual_join
from .params import subtree

def bot_block(x: Tensor, spec: BlockSpec, params: Mapping[str, Tensor]) -> Tensor:
    """This function computes the BoT block.

    Args:
        x:
            Tensor[N, in_channels, fm_h, fm_w].

        spec:
            A bot block with its attention config.

        params:
            Local block records, attention under 'mhsa.'.

    Returns:
        Tensor[N, out_channels, fm_h / stride, fm_w / stride].
    """
    if spec.kind != 'bot' or spec.attention is None:
        raise ConfigurationError(f'bot_block needs a bot spec with attention, got {spec.kind}')
    check_channels(x, spec)

    y = activation(batchnorm(conv2d(x, params['conv1']), params, 'bn1'), spec.activation)
    y = mhsa2d(y, MHSAParams.from_records(subtree(params, 'mhsa.')), spec.attention)
    if spec.stride == 2:
        y = avg_pool2d(y)
    y = activation(batchnorm(y, params, 'bn2'), spec.activation)
    y = batchnorm(conv2d(y, params['conv3']), params, 'bn3')
    return residual_join(y, x, spec, params)
