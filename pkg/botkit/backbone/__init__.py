"""This module brings main classes into the namespace"""
from .builder import (
    DEPTHS,
    MID_WIDTHS,
    PRESETS,
    build_backbone,
    build_preset,
    normalize_res,
    parse_depth,
    preset_key,
)
from .shapes import check_resolution, has_attention, stage_shapes
from .params import block_prefix, init_params, read_params, write_params
from .forward import forward_classifier, forward_features, forward_head
from .document import dump_arch, dumps_arch, from_document, load_arch, loads_arch, to_document
