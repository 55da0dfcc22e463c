#!/usr/bin/python3
"""This module implements all2all multi-head self-attention over a 2D featuremap.

Per head the logits are q k^T (content) plus q r^T (position), where r for the
query at (i, j) and the key at (a, b) is R_h[a - i] + R_w[b - j]. Spatial positions
are flattened row-major (p = h * W + w) and head k owns channels
[k * d_head, (k + 1) * d_head). Queries are scaled by d_head^-1/2 once, which
scales both logit terms. No output projection is applied."""
from typing import Tuple

import numpy as np

from botkit.errors import ConfigurationError, DimensionError, ResolutionError
from botkit.schema import MHSAConfig
from botkit.tensor import (
    Tensor,
    add,
    conv2d,
    gather_lastdim,
    matmul,
    reshape,
    scale,
    softmax_lastdim,
    transpose,
)
from .params import MHSAParams

def offset_index(rows: int, cols: int, axis: int) -> np.ndarray:
    """This function builds the gather index mapping every query position and key
    coordinate along one axis to its relative-table row.

    Args:
        rows, cols:
            Featuremap extents.

        axis:
            0 for heights (key rows a, offset a - i), 1 for widths (key columns b,
            offset b - j).

    Returns:
        Integer array[rows * cols, extent] of offset + extent - 1.
    """
    extent = rows if axis == 0 else cols
    query = np.arange(rows * cols)
    coordinate = query // cols if axis == 0 else query % cols
    return np.arange(extent)[None, :] - coordinate[:, None] + extent - 1

def split_heads(x: Tensor, heads: int) -> Tensor:
    """[N, d, H, W] -> [N, heads, H*W, d_head]"""
    n, d, height, width = x.shape
    return transpose(reshape(x, (n, heads, d // heads, height * width)), (0, 1, 3, 2))

def merge_heads(x: Tensor, height: int, width: int) -> Tensor:
    """[N, heads, H*W, d_head] -> [N, d, H, W]"""
    n, heads, _, d_head = x.shape
    return reshape(transpose(x, (0, 1, 3, 2)), (n, heads * d_head, height, width))

def check_input(x: Tensor, config: MHSAConfig):
    """Raises unless x is [N, d_model, fm_h, fm_w]."""
    if x.ndim != 4 or x.shape[1] != config.d_model:
        raise DimensionError(f'attention input {x.shape} does not have {config.d_model} channels')
    if x.shape[2:] != (config.fm_h, config.fm_w):
        raise ResolutionError((config.fm_h, config.fm_w), x.shape[2:])

def project_qkv(x: Tensor, params: MHSAParams, config: MHSAConfig) -> Tuple[Tensor, Tensor, Tensor]:
    """This function applies the pointwise query, key and value projections and
    splits the results into heads.

    Args:
        x:
            Tensor[N, d_model, fm_h, fm_w].

        params:
            Projection kernels.

        config:
            Attention geometry.

    Returns:
        q, k, v, each Tensor[N, heads, fm_h * fm_w, d_head]; q is pre-scaled by
        the logit scale.
    """
    check_input(x, config)
    params.validate(config)
    q = scale(split_heads(conv2d(x, params.wq), config.heads), config.logit_scale)
    k = split_heads(conv2d(x, params.wk), config.heads)
    v = split_heads(conv2d(x, params.wv), config.heads)
    return q, k, v

def relative_logits_2d(q: Tensor, r_h: Tensor, r_w: Tensor, height: int, width: int) -> Tensor:
    """This function computes the content-position logits of the split relative
    encodings without materializing per-pair embeddings: q is multiplied with both
    tables once, then the per-pair offsets are gathered and the two axes summed.

    Args:
        q:
            Tensor[N, heads, H*W, d_head].

        r_h:
            Tensor[2H - 1, d_head], row (a - i) + H - 1.

        r_w:
            Tensor[2W - 1, d_head], row (b - j) + W - 1.

        height, width:
            Featuremap extents H and W.

    Returns:
        Tensor[N, heads, H*W, H*W].
    """
    n, heads, positions, d_head = q.shape
    if positions != height * width:
        raise DimensionError(f'queries {q.shape} do not cover a {height}x{width} featuremap')
    if r_h.shape != (2 * height - 1, d_head) or r_w.shape != (2 * width - 1, d_head):
        raise ConfigurationError(
            f'relative tables {r_h.shape} and {r_w.shape} do not fit {height}x{width} with d_head {d_head}'
        )

    by_height = gather_lastdim(matmul(q, transpose(r_h, (1, 0))), offset_index(height, width, 0))
    by_width = gather_lastdim(matmul(q, transpose(r_w, (1, 0))), offset_index(height, width, 1))
    logits = add(
        reshape(by_height, (n, heads, positions, height, 1)),
        reshape(by_width, (n, heads, positions, 1, width)),
    )
    return reshape(logits, (n, heads, positions, positions))

def absolute_logits(q: Tensor, p_abs: Tensor) -> Tensor:
    """This function computes q p_abs^T, one learned embedding per key position.

    Args:
        q:
            Tensor[N, heads, H*W, d_head].

        p_abs:
            Tensor[H*W, d_head].

    Returns:
        Tensor[N, heads, H*W, H*W].
    """
    if p_abs.shape != (q.shape[2], q.shape[3]):
        raise ConfigurationError(f'absolute table {p_abs.shape} does not fit queries {q.shape}')
    return matmul(q, transpose(p_abs, (1, 0)))

def attention_logits(q: Tensor, k: Tensor, params: MHSAParams, config: MHSAConfig) -> Tensor:
    """Sums the logit terms enabled by the configuration."""
    terms = []
    if config.content_logits:
        terms.append(matmul(q, transpose(k, (0, 1, 3, 2))))
    if config.pos_mode == 'relative':
        terms.append(relative_logits_2d(q, params.r_h, params.r_w, config.fm_h, config.fm_w))
    elif config.pos_mode == 'absolute':
        terms.append(absolute_logits(q, params.p_abs))

    logits = terms[0]
    for term in terms[1:]:
        logits = add(logits, term)
    return logits

def mhsa2d(x: Tensor, params: MHSAParams, config: MHSAConfig) -> Tensor:
    """This function applies multi-head self-attention to every position of a
    featuremap: per head softmax(logits) v, heads concatenated back to d_model
    channels. The result is not residual-added.

    Args:
        x:
            Tensor[N, d_model, fm_h, fm_w].

        params:
            Projections and position tables.

        config:
            Attention geometry and position mode.

    Returns:
        Tensor[N, d_model, fm_h, fm_w].
    """
    q, k, v = project_qkv(x, params, config)
    weights = softmax_lastdim(attention_logits(q, k, params, config))
    return merge_heads(matmul(weights, v), config.fm_h, config.fm_w)
