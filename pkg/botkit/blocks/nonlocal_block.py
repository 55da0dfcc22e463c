#!/usr/bin/python3
"""This module implements the inserted non-local block."""
from typing import Mapping

from botkit.attention import NonLocalParams, nonlocal_layer
from botkit.schema import BlockSpec
from botkit.tensor import Tensor
from .bottleneck import check_channels
from .params import subtree

def nonlocal_block(x: Tensor, spec: BlockSpec, params: Mapping[str, Tensor]) -> Tensor:
    """Applies the non-local layer, residual included, to a featuremap."""
    check_channels(x, spec)
    return nonlocal_layer(x, NonLocalParams.from_records(subtree(params, 'nl.')))
