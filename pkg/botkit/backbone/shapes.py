#!/usr/bin/python3
"""This module implements shape inference over an architecture without
allocating featuremaps."""
from typing import List, Optional, Sequence, Tuple, Union

from botkit.errors import ResolutionError
from botkit.schema import ArchSpec
from .builder import normalize_res

StageShape = Tuple[str, int, int, int]

def has_attention(arch: ArchSpec) -> bool:
    """True when some block attends over a fixed featuremap size."""
    return any(block.attention is not None for blocks in arch.blockgroups for block in blocks)

def check_resolution(arch: ArchSpec, resolution: Sequence[int]):
    """This function rejects inputs the architecture cannot run at. Attention
    blocks are built for one featuremap size, so only arch.input_res is valid
    for them; convolutional networks accept any multiple of 32.

    Args:
        arch:
            The architecture.

        resolution:
            (H, W) of the input.
    """
    resolution = tuple(resolution)
    if resolution == tuple(arch.input_res):
        return
    if has_attention(arch):
        raise ResolutionError(arch.input_res, resolution)

def stage_shapes(arch: ArchSpec, input_res: Optional[Union[int, Sequence[int]]] = None) -> List[StageShape]:
    """This function infers the output shape of every stage.

    Args:
        arch:
            The architecture.

        input_res:
            Input resolution; defaults to arch.input_res.

    Returns:
        Ordered (stage, H, W, C) for c1 (stem convolution) and c2..c5.
    """
    res = normalize_res(arch.input_res if input_res is None else input_res)
    check_resolution(arch, res)

    height, width = res[0] // 2, res[1] // 2
    shapes = [('c1', height, width, arch.stem_channels)]
    height, width = height // 2, width // 2
    for group, blocks in arch.groups():
        for block in blocks:
            height, width = height // block.stride, width // block.stride
        shapes.append((group, height, width, blocks[-1].out_channels))
    return shapes
