"""This module brings main classes into the namespace"""
from typing import Mapping

from botkit.schema import BlockSpec
from botkit.tensor import Tensor
from .bot import bot_block
from .bottleneck import batchnorm, bottleneck_block, shortcut
from .nonlocal_block import nonlocal_block
from .params import BN_FIELDS, init_block_params, init_bn, init_conv, prefixed, se_width, subtree
from .se import se_gate

BLOCK_FUNCTIONS = {
    'conv_bottleneck': bottleneck_block,
    'bot': bot_block,
    'nl_insert': nonlocal_block,
}

def apply_block(x: Tensor, spec: BlockSpec, params: Mapping[str, Tensor]) -> Tensor:
    """Dispatches on the block kind."""
    return BLOCK_FUNCTIONS[spec.kind](x, spec, params)
