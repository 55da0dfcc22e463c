#!/usr/bin/python3
"""This module implements declarative backbone construction for the resnet, botnet,
botnet_s1 and senet families."""
from typing import Dict, List, Optional, Sequence, Tuple, Union

from botkit.audit import logging
from botkit.errors import ConfigurationError
from botkit.schema import (
    FAMILIES,
    GROUP_NAMES,
    ArchSpec,
    BlockSpec,
    MHSAConfig,
    NLInsertion,
    ReplacementConfig,
)

RESNET_DEPTHS: Dict[Union[int, str], List[int]] = {
    50: [3, 4, 6, 3],
    101: [3, 4, 23, 3],
    152: [3, 8, 36, 3],
    200: [3, 24, 36, 3],
}

DEPTHS: Dict[str, Dict[Union[int, str], List[int]]] = {
    'resnet': RESNET_DEPTHS,
    'botnet': RESNET_DEPTHS,
    'botnet_s1': {
        50: [3, 4, 6, 3],
        101: [3, 4, 23, 3],
        152: [3, 8, 36, 3],
        'S1-59': [3, 4, 6, 6],
        'S1-77': [3, 4, 6, 12],
        'S1-110': [3, 4, 23, 6],
        'S1-128': [3, 4, 23, 12],
    },
    'senet': {
        50: [3, 4, 6, 3],
        101: [3, 4, 23, 3],
        152: [3, 8, 36, 3],
        350: [4, 40, 60, 12],
    },
}

# ImageNet models: name -> (family, depth, input resolution)
PRESETS: Dict[str, Tuple[str, Union[int, str], int]] = {
    'S0': ('senet', 50, 160),
    'S1': ('senet', 101, 224),
    'S2': ('senet', 152, 224),
    'S3': ('senet', 152, 288),
    'S4': ('senet', 350, 320),
    'S5': ('senet', 350, 384),
    'T3': ('botnet_s1', 'S1-59', 224),
    'T4': ('botnet_s1', 'S1-110', 224),
    'T5': ('botnet_s1', 'S1-128', 256),
    'T6': ('botnet_s1', 'S1-77', 320),
    'T7-320': ('botnet_s1', 'S1-128', 320),
    'T7': ('botnet_s1', 'S1-128', 384),
}

MID_WIDTHS = (64, 128, 256, 512)
STEM_WIDTH = 64
ATTENTION_FAMILIES = ('botnet', 'botnet_s1')

def parse_depth(family: str, depth_or_name: Union[int, str]) -> Union[int, str]:
    """This function normalizes a depth or variant name to a key of the depth table.

    Args:
        family:
            Backbone family.

        depth_or_name:
            50, '50' or a named variant such as 'S1-59'.

    Returns:
        The table key.
    """
    if family not in DEPTHS:
        raise ConfigurationError(f'unknown family {family}, expected one of {", ".join(FAMILIES)}')
    key: Union[int, str] = depth_or_name
    if isinstance(depth_or_name, str) and depth_or_name.isdigit():
        key = int(depth_or_name)
    if key not in DEPTHS[family]:
        known = ', '.join(str(name) for name in DEPTHS[family])
        raise ConfigurationError(f'unknown {family} depth {depth_or_name}, expected one of {known}')
    return key

def arch_name(family: str, key: Union[int, str, None]) -> str:
    """Display name such as BoTNet-50 or BoTNet-S1-59."""
    prefix = {'resnet': 'ResNet', 'botnet': 'BoTNet', 'botnet_s1': 'BoTNet-S1', 'senet': 'SENet'}[family]
    if key is None:
        return f'{prefix}-custom'
    if isinstance(key, str):
        return f'BoTNet-{key}'
    return f'{prefix}-{key}'

def preset_key(name: Optional[str]) -> Optional[str]:
    """Returns the preset table key matching name case-insensitively, or None."""
    if not name:
        return None
    key = name.strip().upper()
    return key if key in PRESETS else None

def build_preset(
        name: str,
        input_res: Union[int, Sequence[int], None] = None,
        replacement: Union[ReplacementConfig, Sequence[int], None] = None,
        **options
    ) -> ArchSpec:
    """This function builds one of the named ImageNet models.

    Args:
        name:
            Preset such as 'T3', 'T7-320' or 'S5'.

        input_res:
            Overrides the resolution the preset was trained at.

        replacement:
            c5 flags and insertions, as for build_backbone.

        options:
            Further build_backbone keywords such as width_divisor.

    Returns:
        The architecture, named after the preset and its backbone.
    """
    key = preset_key(name)
    if key is None:
        raise ConfigurationError(f'unknown preset {name}, expected one of {", ".join(PRESETS)}')
    family, depth, res = PRESETS[key]
    options.setdefault('name', f'{key} ({arch_name(family, depth)})')
    return build_backbone(family, depth, replacement, res if input_res is None else input_res, **options)

def normalize_res(input_res: Union[int, Sequence[int]]) -> Tuple[int, int]:
    """Accepts 224 or (224, 224); both extents must be divisible by 32."""
    if isinstance(input_res, int):
        res = (input_res, input_res)
    else:
        res = tuple(int(extent) for extent in input_res)
    if len(res) != 2 or any(extent < 32 or extent % 32 for extent in res):
        raise ConfigurationError(f'input resolution {input_res} must be positive and divisible by 32')
    return res

def normalize_replacement(
        family: str,
        replacement: Union[ReplacementConfig, Sequence[int], None],
        c5_blocks: int
    ) -> ReplacementConfig:
    """This function fills in the default c5 flags of a family and checks them.

    Args:
        family:
            Backbone family.

        replacement:
            A config, a plain flag sequence, or None for the family default.

        c5_blocks:
            Number of c5 blocks.

    Returns:
        A checked replacement config.
    """
    if replacement is None:
        replacement = ReplacementConfig()
    elif not isinstance(replacement, ReplacementConfig):
        replacement = ReplacementConfig(flags=[bool(flag) for flag in replacement])

    flags = list(replacement.flags)
    if not flags:
        flags = [family in ATTENTION_FAMILIES] * c5_blocks
    if len(flags) != c5_blocks:
        raise ConfigurationError(f'{len(flags)} replacement flags for {c5_blocks} c5 blocks')
    if family in ('resnet', 'senet') and any(flags):
        raise ConfigurationError(f'{family} has no attention blocks; use the botnet family to replace c5 blocks')
    if family == 'botnet_s1' and not all(flags):
        raise ConfigurationError('botnet_s1 requires every c5 block to be replaced')

    return ReplacementConfig(flags=flags, nl_insertions=replacement.nl_insertions)

def family_defaults(family: str, key: Union[int, str, None]) -> Tuple[str, List[str]]:
    """Activation and SE groups of a family: SE and SiLU for senet and the named S1
    variants, plain ReLU networks otherwise."""
    if family == 'senet':
        return 'silu', list(GROUP_NAMES)
    if family == 'botnet_s1' and isinstance(key, str):
        return 'silu', ['c2', 'c3', 'c4']
    return 'relu', []

def build_backbone(
        family: str,
        depth_or_name: Union[int, str, None] = 50,
        replacement: Union[ReplacementConfig, Sequence[int], None] = None,
        input_res: Union[int, Sequence[int]] = 224,
        n_classes: Optional[int] = 1000,
        activation: Optional[str] = None,
        heads: int = 4,
        pos_mode: str = 'relative',
        content_logits: bool = True,
        se_ratio: Optional[int] = None,
        se_groups: Optional[Sequence[str]] = None,
        width_divisor: int = 1,
        blockgroups: Optional[Sequence[int]] = None,
        value_projection: bool = False,
        name: Optional[str] = None
    ) -> ArchSpec:
    """This function elaborates a backbone into its full block list.

    Args:
        family:
            resnet, botnet, botnet_s1 or senet.

        depth_or_name:
            Depth or named variant of the family table; may be None when
            `blockgroups` is given.

        replacement:
            Flags per c5 block and optional insertions. botnet defaults to all
            ones, resnet and senet to all zeros; botnet_s1 requires all ones.

        input_res:
            Input resolution the position tables are sized for, divisible by 32.

        n_classes:
            Classifier width, or None for a headless backbone.

        activation:
            relu or silu; defaults per family.

        heads:
            Attention heads of every BoT block.

        pos_mode:
            relative, absolute or none.

        content_logits:
            Keep the q k^T term.

        se_ratio:
            SE reduction ratio, 16 when SE groups are present.

        se_groups:
            Blockgroups whose convolutional bottlenecks get SE gates.

        width_divisor:
            Divides every channel width.

        blockgroups:
            Explicit block counts for c2..c5, overriding the table.

        value_projection:
            Inserted non-local blocks carry a value projection.

        name:
            Display name; derived from family and depth by default.

    Returns:
        The architecture.
    """
    key = None
    if depth_or_name is not None:
        key = parse_depth(family, depth_or_name)
        depths = list(DEPTHS[family][key])
    elif family not in DEPTHS:
        raise ConfigurationError(f'unknown family {family}, expected one of {", ".join(FAMILIES)}')
    if blockgroups is not None:
        depths = [int(count) for count in blockgroups]
    elif key is None:
        raise ConfigurationError('either a depth or explicit blockgroups is required')
    if len(depths) != 4 or min(depths) < 1:
        raise ConfigurationError(f'blockgroups must be four positive counts, got {depths}')

    res = normalize_res(input_res)
    default_activation, default_se_groups = family_defaults(family, key)
    activation = activation or default_activation
    se_groups = list(default_se_groups if se_groups is None else se_groups)
    if any(group not in GROUP_NAMES for group in se_groups):
        raise ConfigurationError(f'unknown SE groups {se_groups}')
    if se_groups and se_ratio is None:
        se_ratio = 16
    if width_divisor < 1 or STEM_WIDTH % width_divisor:
        raise ConfigurationError(f'width divisor {width_divisor} must divide {STEM_WIDTH}')

    replacement = normalize_replacement(family, replacement, depths[3])
    stride_one_c5 = family == 'botnet_s1'

    height, width = res[0] // 4, res[1] // 4
    in_channels = STEM_WIDTH // width_divisor
    groups: List[List[BlockSpec]] = []
    try:
        for index, (group, count) in enumerate(zip(GROUP_NAMES, depths)):
            mid = MID_WIDTHS[index] // width_divisor
            group_stride = 1 if index == 0 or (group == 'c5' and stride_one_c5) else 2
            blocks = []
            for position in range(count):
                stride = group_stride if position == 0 else 1
                if group == 'c5' and replacement.flags[position]:
                    blocks.append(BlockSpec(
                        kind='bot', in_channels=in_channels, mid_channels=mid, out_channels=4 * mid,
                        stride=stride, activation=activation,
                        attention=MHSAConfig(
                            d_model=mid, heads=heads, fm_h=height, fm_w=width,
                            pos_mode=pos_mode, content_logits=content_logits,
                        ),
                    ))
                else:
                    blocks.append(BlockSpec(
                        in_channels=in_channels, mid_channels=mid, out_channels=4 * mid, stride=stride,
                        activation=activation, se=se_ratio if group in se_groups else None,
                    ))
                height, width = height // stride, width // stride
                in_channels = 4 * mid

            insertions = [item for item in replacement.nl_insertions if item.group == group]
            groups.append(insert_blocks(
                blocks, insertions, (height, width), heads, pos_mode, content_logits, activation, value_projection
            ))
    except ValueError as error:
        if isinstance(error, ConfigurationError):
            raise
        raise ConfigurationError(str(error)) from error

    arch = ArchSpec(
        name=name or arch_name(family, key),
        family=family,
        depths=depths,
        stem_channels=STEM_WIDTH // width_divisor,
        blockgroups=groups,
        replacement=replacement,
        input_res=res,
        n_classes=n_classes,
        activation=activation,
        heads=heads,
        pos_mode=pos_mode,
        content_logits=content_logits,
        se_ratio=se_ratio,
        se_groups=se_groups,
        width_divisor=width_divisor,
        value_projection=value_projection,
    )
    logging.debug(f'built {arch.name}: {depths} at {res[0]}x{res[1]}')
    return arch

def insert_blocks(
        blocks: List[BlockSpec],
        insertions: Sequence[NLInsertion],
        resolution: Tuple[int, int],
        heads: int,
        pos_mode: str,
        content_logits: bool,
        activation: str,
        value_projection: bool
    ) -> List[BlockSpec]:
    """This function inserts additional shape-preserving blocks into a group. An
    insertion at position p goes before the p-th original block; the default is
    between the pre-final and final blocks.

    Args:
        blocks:
            Original blocks of the group.

        insertions:
            Insertions targeting this group.

        resolution:
            Output featuremap size of the group.

        heads, pos_mode, content_logits, activation:
            Settings of inserted BoT blocks.

        value_projection:
            Inserted non-local blocks carry a value projection.

    Returns:
        The group with insertions applied.
    """
    channels = blocks[-1].out_channels
    placed = []
    for insertion in insertions:
        position = len(blocks) - 1 if insertion.position is None else insertion.position
        if not 1 <= position <= len(blocks):
            raise ConfigurationError(
                f'insertion position {position} outside 1..{len(blocks)} in {insertion.group}'
            )
        if insertion.kind == 'nl':
            block = BlockSpec(
                kind='nl_insert', in_channels=channels, mid_channels=channels // 2,
                out_channels=channels, value_projection=value_projection,
            )
        else:
            block = BlockSpec(
                kind='bot', in_channels=channels, mid_channels=channels // 4, out_channels=channels,
                activation=activation,
                attention=MHSAConfig(
                    d_model=channels // 4, heads=heads, fm_h=resolution[0], fm_w=resolution[1],
                    pos_mode=pos_mode, content_logits=content_logits,
                ),
            )
        placed.append((position, block))

    result = list(blocks)
    for position, block in sorted(placed, key=lambda item: item[0], reverse=True):
        result.insert(position, block)
    return result
