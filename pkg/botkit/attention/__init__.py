"""This module brings main classes into the namespace"""
from .params import MHSA_RECORDS, MHSAParams, NonLocalParams, init_mhsa_params, init_nonlocal_params
from .mhsa import (
    absolute_logits,
    attention_logits,
    merge_heads,
    mhsa2d,
    offset_index,
    project_qkv,
    relative_logits_2d,
    split_heads,
)
from .nonlocal_layer import nonlocal_layer
from .oracle import brute_relative_logits, naive_mhsa, nonlocal_as_mhsa, nonlocal_via_mhsa, permute_positions
