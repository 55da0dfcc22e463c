#!/usr/bin/python3
"""This module implements the end-to-end forward: stem, c2..c5 and the
classifier head. Every stage runs under a meter scope named after it."""
from typing import Dict, Mapping

from botkit.blocks import apply_block, batchnorm, subtree
from botkit.errors import DimensionError, ParameterError
from botkit.schema import ArchSpec
from botkit.tensor import (
    Tensor,
    activation,
    add,
    conv2d,
    global_avg_pool,
    matmul,
    max_pool2d,
    scope,
    transpose,
)
from .params import block_prefix
from .shapes import check_resolution

def forward_features(arch: ArchSpec, params: Mapping[str, Tensor], x: Tensor) -> Dict[str, Tensor]:
    """This function runs the stem and every blockgroup.

    Args:
        arch:
            The architecture.

        params:
            Dotted records from init_params or a bundle.

        x:
            Tensor[N, 3, H, W] at arch.input_res.

    Returns:
        Stage name to output: c1 is the stem convolution output before max
        pooling, c2..c5 the blockgroup outputs.
    """
    if x.ndim != 4 or x.shape[1] != 3:
        raise DimensionError(f'expected an N x 3 x H x W input, got {x.shape}')
    check_resolution(arch, x.shape[2:])

    try:
        features = {}
        with scope('c1'):
            y = conv2d(x, params['stem.conv'], stride=2, pad=3)
            y = activation(batchnorm(y, params, 'stem.bn'), arch.activation)
        features['c1'] = y
        y = max_pool2d(y)

        for group, blocks in arch.groups():
            with scope(group):
                for position, spec in enumerate(blocks):
                    y = apply_block(y, spec, subtree(params, block_prefix(group, position)))
            features[group] = y
    except KeyError as error:
        raise ParameterError(f'missing parameter {error}') from error
    return features

def forward_head(arch: ArchSpec, params: Mapping[str, Tensor], features: Tensor) -> Tensor:
    """Global average pooling then the fully-connected layer with bias."""
    if arch.n_classes is None:
        raise ParameterError(f'{arch.name} has no classifier head')
    try:
        weights, bias = params['head.fc.w'], params['head.fc.b']
    except KeyError as error:
        raise ParameterError(f'missing parameter {error}') from error
    with scope('head'):
        return add(matmul(global_avg_pool(features), transpose(weights, (1, 0))), bias)

def forward_classifier(arch: ArchSpec, params: Mapping[str, Tensor], x: Tensor) -> Tensor:
    """This function computes classifier logits, without softmax.

    Args:
        arch:
            An architecture with a head.

        params:
            Dotted records.

        x:
            Tensor[N, 3, H, W] at arch.input_res.

    Returns:
        Tensor[N, n_classes].
    """
    return forward_head(arch, params, forward_features(arch, params, x)['c5'])
