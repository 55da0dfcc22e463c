#!/usr/bin/python3
"""This module implements the convolutional bottleneck block and the pieces every
residual block shares: conv+BN, the shortcut and the residual join."""
from typing import Mapping

from botkit.errors import ConfigurationError
from botkit.schema import BlockSpec
from botkit.tensor import Tensor, activation, add, batchnorm_affine, conv2d
from .params import subtree
from .se import se_gate

def batchnorm(x: Tensor, params: Mapping[str, Tensor], name: str) -> Tensor:
    """Applies the named inference batch normalization."""
    return batchnorm_affine(
        x, params[f'{name}.gamma'], params[f'{name}.beta'], params[f'{name}.mean'], params[f'{name}.var']
    )

def shortcut(x: Tensor, spec: BlockSpec, params: Mapping[str, Tensor]) -> Tensor:
    """Identity, or BN(strided 1x1 conv) when the block changes shape."""
    if not spec.has_projection:
        return x
    return batchnorm(conv2d(x, params['shortcut'], stride=spec.stride), params, 'shortcut_bn')

def check_channels(x: Tensor, spec: BlockSpec):
    """Raises unless x carries the block's input channels."""
    if x.ndim != 4 or x.shape[1] != spec.in_channels:
        raise ConfigurationError(f'{spec.kind} block expects {spec.in_channels} input channels, got {x.shape}')

def residual_join(branch: Tensor, x: Tensor, spec: BlockSpec, params: Mapping[str, Tensor]) -> Tensor:
    """Gates the branch when SE is on, adds the shortcut and activates."""
    if spec.se is not None:
        branch = se_gate(branch, subtree(params, 'se.'), spec.se, spec.activation)
    return activation(add(branch, shortcut(x, spec, params)), spec.activation)

def bottleneck_block(x: Tensor, spec: BlockSpec, params: Mapping[str, Tensor]) -> Tensor:
    """This function computes act(BN(conv1x1(act(BN(conv3x3(act(BN(conv1x1 x))))))
    + shortcut(x)); the stride sits on the 3x3 convolution.

    Args:
        x:
            Tensor[N, in_channels, H, W].

        spec:
            A conv_bottleneck block.

        params:
            Local block records.

    Returns:
        Tensor[N, out_channels, H / stride, W / stride].
    """
    check_channels(x, spec)
    y = activation(batchnorm(conv2d(x, params['conv1']), params, 'bn1'), spec.activation)
    y = activation(
        batchnorm(conv2d(y, params['conv2'], stride=spec.stride, pad=1), params, 'bn2'), spec.activation
    )
    y = batchnorm(conv2d(y, params['conv3']), params, 'bn3')
    return residual_join(y, x, spec, params)
