#!/usr/bin/python3
"""This module implements block parameter initialization and record naming.

Block parameters are flat dictionaries of tensors keyed by local names:
conv1, bn1.gamma, bn1.beta, bn1.mean, bn1.var, conv2 (or mhsa.wq, mhsa.r_h, ...),
bn2.*, conv3, bn3.*, shortcut, shortcut_bn.*, se.w1, se.w2, and nl.theta, nl.phi,
nl.g, nl.z for non-local blocks."""
from typing import Dict, Mapping

from botkit.attention import init_mhsa_params, init_nonlocal_params
from botkit.schema import BlockSpec
from botkit.tensor import Tensor, normal, uniform

BN_FIELDS = ('gamma', 'beta', 'mean', 'var')

def subtree(params: Mapping[str, Tensor], prefix: str) -> Dict[str, Tensor]:
    """This function selects the records under a dotted prefix and strips it.

    Args:
        params:
            Flat records.

        prefix:
            Prefix such as 'c5.0.' or 'mhsa.'.

    Returns:
        Records relative to the prefix.
    """
    return {name[len(prefix):]: tensor for name, tensor in params.items() if name.startswith(prefix)}

def prefixed(params: Mapping[str, Tensor], prefix: str) -> Dict[str, Tensor]:
    """Adds a dotted prefix to every record name."""
    return {f'{prefix}{name}': tensor for name, tensor in params.items()}

def init_conv(seed: int, name: str, cout: int, cin: int, kernel: int, dtype: str) -> Tensor:
    """He-normal convolution kernel."""
    return normal(seed, name, (cout, cin, kernel, kernel), (2.0 / (cin * kernel * kernel)) ** 0.5, dtype)

def init_bn(seed: int, name: str, channels: int, dtype: str) -> Dict[str, Tensor]:
    """Mild random inference statistics and affine terms."""
    return {
        f'{name}.gamma': uniform(seed, f'{name}.gamma', (channels,), 0.8, 1.2, dtype),
        f'{name}.beta': normal(seed, f'{name}.beta', (channels,), 0.1, dtype),
        f'{name}.mean': normal(seed, f'{name}.mean', (channels,), 0.1, dtype),
        f'{name}.var': uniform(seed, f'{name}.var', (channels,), 0.8, 1.2, dtype),
    }

def se_width(channels: int, ratio: int) -> int:
    """Reduced SE width max(1, C / ratio)."""
    return max(1, channels // ratio)

def init_block_params(spec: BlockSpec, seed: int = 0, prefix: str = '', dtype: str = 'float64') -> Dict[str, Tensor]:
    """This function draws every parameter of one block.

    Args:
        spec:
            The block.

        seed:
            Run seed.

        prefix:
            Dotted name of the block ('c5.0.'); keys the random streams only,
            the returned names are local.

        dtype:
            Parameter dtype.

    Returns:
        Local record names to tensors.
    """
    if spec.kind == 'nl_insert':
        layer = init_nonlocal_params(
            spec.in_channels, seed, f'{prefix}nl', spec.value_projection, dtype
        )
        return prefixed(layer.records(), 'nl.')

    mid, out = spec.mid_channels, spec.out_channels
    params = {'conv1': init_conv(seed, f'{prefix}conv1', mid, spec.in_channels, 1, dtype)}
    params.update(subtree(init_bn(seed, f'{prefix}bn1', mid, dtype), prefix))
    if spec.kind == 'bot':
        attention = init_mhsa_params(spec.attention, seed, f'{prefix}mhsa', dtype)
        params.update(prefixed(attention.records(), 'mhsa.'))
    else:
        params['conv2'] = init_conv(seed, f'{prefix}conv2', mid, mid, 3, dtype)
    params.update(subtree(init_bn(seed, f'{prefix}bn2', mid, dtype), prefix))
    params['conv3'] = init_conv(seed, f'{prefix}conv3', out, mid, 1, dtype)
    params.update(subtree(init_bn(seed, f'{prefix}bn3', out, dtype), prefix))

    if spec.has_projection:
        params['shortcut'] = init_conv(seed, f'{prefix}shortcut', out, spec.in_channels, 1, dtype)
        params.update(subtree(init_bn(seed, f'{prefix}shortcut_bn', out, dtype), prefix))

    if spec.se is not None:
        reduced = se_width(out, spec.se)
        params['se.w1'] = normal(seed, f'{prefix}se.w1', (reduced, out), out ** -0.5, dtype)
        params['se.w2'] = normal(seed, f'{prefix}se.w2', (out, reduced), reduced ** -0.5, dtype)

    return params
