#!/usr/bin/python3
"""This module implements whole-backbone parameter generation and the .botkp
parameter bundles. Record names are dotted paths: stem.conv, stem.bn.gamma,
c5.0.mhsa.wq, c4.6.nl.theta, head.fc.w, head.fc.b."""
from typing import Dict

from botkit.audit import logging
from botkit.blocks import init_block_params, init_bn, init_conv, prefixed
from botkit.errors import SerializationError
from botkit.schema import ArchSpec
from botkit.tensor import Tensor, normal, read_bundle, write_bundle

def block_prefix(group: str, position: int) -> str:
    """Dotted prefix of one block, e.g. 'c5.0.'."""
    return f'{group}.{position}.'

def init_params(arch: ArchSpec, seed: int = 0, dtype: str = 'float64') -> Dict[str, Tensor]:
    """This function draws every parameter of an architecture. Each tensor comes
    from its own named stream, so a given name has the same value in every
    architecture that shares it.

    Args:
        arch:
            The architecture.

        seed:
            Run seed.

        dtype:
            Parameter dtype.

    Returns:
        Dotted record names to tensors.
    """
    params = {'stem.conv': init_conv(seed, 'stem.conv', arch.stem_channels, 3, 7, dtype)}
    params.update(init_bn(seed, 'stem.bn', arch.stem_channels, dtype))

    for group, blocks in arch.groups():
        for position, spec in enumerate(blocks):
            prefix = block_prefix(group, position)
            params.update(prefixed(init_block_params(spec, seed, prefix, dtype), prefix))

    if arch.n_classes is not None:
        channels = arch.blockgroups[-1][-1].out_channels
        params['head.fc.w'] = normal(seed, 'head.fc.w', (arch.n_classes, channels), channels ** -0.5, dtype)
        params['head.fc.b'] = normal(seed, 'head.fc.b', (arch.n_classes,), 0.01, dtype)

    logging.debug(f'{arch.name}: drew {len(params)} parameter tensors with seed {seed}')
    return params

def write_params(path: str, params: Dict[str, Tensor]):
    """Writes a .botkp bundle."""
    with open(path, 'wb') as file:
        write_bundle(file, params)

def read_params(path: str) -> Dict[str, Tensor]:
    """Reads a .botkp bundle."""
    try:
        with open(path, 'rb') as file:
            return read_bundle(file)
    except OSError as error:
        raise SerializationError(f'failed to read {path}: {error}') from error
