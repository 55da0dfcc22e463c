#!/usr/bin/python3
"""This module implements the single-head non-local layer: embeddings reduced to
C/2 channels, no position encodings, and values taken from the key embedding
unless a separate value projection is present. The residual is added inside."""
from botkit.errors import ConfigurationError, DimensionError, ShapeError
from botkit.tensor import (
    Tensor,
    add,
    conv2d,
    matmul,
    reshape,
    softmax_lastdim,
    transpose,
)
from .params import NonLocalParams

def _flatten(x: Tensor) -> Tensor:
    n, c, height, width = x.shape
    return transpose(reshape(x, (n, c, height * width)), (0, 2, 1))

def nonlocal_layer(x: Tensor, params: NonLocalParams) -> Tensor:
    """This function computes x + Wz (softmax(theta phi^T) values).

    Args:
        x:
            Tensor[N, C, H, W] with C even.

        params:
            theta, phi, optional g, z.

    Returns:
        Tensor[N, C, H, W].
    """
    if x.ndim != 4:
        raise DimensionError(f'non-local input must be 4D, got {x.shape}')
    n, channels, height, width = x.shape
    if channels % 2:
        raise ConfigurationError(f'non-local layer needs an even channel count, got {channels}')
    inner = channels // 2
    embedding = (inner, channels, 1, 1)
    expected = {'theta': embedding, 'phi': embedding, 'g': embedding, 'z': (channels, inner, 1, 1)}
    for name, weight in params.records().items():
        if weight.shape != expected[name]:
            raise ShapeError(
                f'non-local {name} has shape {weight.shape}, expected {expected[name]} for {channels} channels'
            )

    theta = _flatten(conv2d(x, params.theta))
    phi = _flatten(conv2d(x, params.phi))
    values = phi if params.g is None else _flatten(conv2d(x, params.g))

    weights = softmax_lastdim(matmul(theta, transpose(phi, (0, 2, 1))))
    aggregated = reshape(transpose(matmul(weights, values), (0, 2, 1)), (n, inner, height, width))
    return add(x, conv2d(aggregated, params.z))
