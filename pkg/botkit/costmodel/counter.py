#!/usr/bin/python3
"""This module implements the closed-form parameter and multiply-add counts.

One multiply-add is one multiply-accumulate. Convolutions cost
Cout*Cin*k*k*Hout*Wout, the classifier in*out. Batchnorm, activations, pooling
and softmax are free. Attention is counted the way it is executed: the three
1x1 projections, q.k and A.v over all position pairs, and the relative logits as
two table products followed by a gather."""
from typing import Dict, List, Optional, Sequence, Tuple, Union

from botkit.audit import logging
from botkit.blocks import se_width
from botkit.schema import COMPONENTS, ArchSpec, BlockSpec, CostReport, CostRow, CostTotals
from botkit.backbone import check_resolution, normalize_res, stage_shapes
from .reference import annotations

BLOCK_LABELS = {'conv_bottleneck': 'conv', 'bot': 'MHSA', 'nl_insert': 'NL'}

def _zero() -> Dict[str, int]:
    return {name: 0 for name in COMPONENTS}

def block_label(spec: BlockSpec) -> str:
    """Short kind label used in tables, e.g. 'conv+SE' or 'MHSA'."""
    label = BLOCK_LABELS[spec.kind]
    return f'{label}+SE' if spec.se else label

def table_params(spec: BlockSpec) -> int:
    """Position-table parameters of one block."""
    config = spec.attention
    if config is None or config.pos_mode == 'none':
        return 0
    if config.pos_mode == 'relative':
        return (2 * config.fm_h - 1 + 2 * config.fm_w - 1) * config.d_head
    return config.positions * config.d_head

def block_params(spec: BlockSpec) -> int:
    """This function counts the trainable parameters of one block. Batchnorm
    contributes its affine pair, never its running statistics.

    Args:
        spec:
            The block.

    Returns:
        Parameter count.
    """
    cin, mid, cout = spec.in_channels, spec.mid_channels, spec.out_channels
    if spec.kind == 'nl_insert':
        embeddings = 4 if spec.value_projection else 3
        return embeddings * cin * mid

    count = cin * mid + 2 * mid
    if spec.kind == 'bot':
        count += 3 * mid * mid + table_params(spec)
    else:
        count += 9 * mid * mid
    count += 2 * mid
    count += mid * cout + 2 * cout
    if spec.has_projection:
        count += cin * cout + 2 * cout
    if spec.se:
        count += 2 * cout * se_width(cout, spec.se)
    return count

def block_madds(spec: BlockSpec, height: int, width: int) -> Dict[str, int]:
    """This function counts the multiply-adds of one block per component.

    Args:
        spec:
            The block.

        height, width:
            Input featuremap extent.

    Returns:
        Component name to multiply-adds.
    """
    cin, mid, cout = spec.in_channels, spec.mid_channels, spec.out_channels
    positions = height * width
    out_positions = (height // spec.stride) * (width // spec.stride)
    costs = _zero()

    if spec.kind == 'nl_insert':
        embeddings = 3 if spec.value_projection else 2
        costs['attn_proj'] = (embeddings + 1) * positions * cin * mid
        costs['attn_content'] = 2 * positions * positions * mid
        return costs

    costs['conv'] = cin * mid * positions
    if spec.kind == 'bot':
        config = spec.attention
        pairs = positions * positions
        costs['attn_proj'] = 3 * positions * mid * mid
        costs['attn_content'] = (2 if config.content_logits else 1) * pairs * mid
        if config.pos_mode == 'relative':
            costs['attn_position'] = positions * (2 * height - 1 + 2 * width - 1) * mid
        elif config.pos_mode == 'absolute':
            costs['attn_position'] = pairs * mid
    else:
        costs['conv'] += 9 * mid * mid * out_positions
    costs['conv'] += mid * cout * out_positions
    if spec.has_projection:
        costs['conv'] += cin * cout * out_positions
    if spec.se:
        costs['se'] = 2 * cout * se_width(cout, spec.se)
    return costs

def _stage_rows(arch: ArchSpec, res: Tuple[int, int]) -> List[CostRow]:
    shapes = {stage: (height, width, channels) for stage, height, width, channels in stage_shapes(arch, res)}

    height, width, channels = shapes['c1']
    stem = _zero()
    stem['conv'] = 3 * channels * 49 * height * width
    rows = [CostRow(
        stage='c1', height=height, width=width, channels=channels, blocks=['conv7x7'],
        params=3 * channels * 49 + 2 * channels, madds=sum(stem.values()), components=stem,
    )]

    height, width = height // 2, width // 2
    for group, blocks in arch.groups():
        components = _zero()
        params = 0
        for spec in blocks:
            for name, value in block_madds(spec, height, width).items():
                components[name] += value
            params += block_params(spec)
            height, width = height // spec.stride, width // spec.stride
        stage_height, stage_width, channels = shapes[group]
        rows.append(CostRow(
            stage=group, height=stage_height, width=stage_width, channels=channels,
            blocks=[block_label(spec) for spec in blocks],
            params=params, madds=sum(components.values()), components=components,
        ))

    if arch.n_classes is not None:
        channels = arch.blockgroups[-1][-1].out_channels
        head = _zero()
        head['fc'] = channels * arch.n_classes
        rows.append(CostRow(
            stage='head', height=1, width=1, channels=arch.n_classes, blocks=['fc'],
            params=channels * arch.n_classes + arch.n_classes, madds=head['fc'], components=head,
        ))
    return rows

def _report(arch: ArchSpec, res: Tuple[int, int], rows: List[CostRow]) -> CostReport:
    return CostReport(
        arch=arch.name,
        resolution=res,
        rows=rows,
        totals=CostTotals(params=sum(row.params for row in rows), madds=sum(row.madds for row in rows)),
        annotations=annotations(arch, res),
    )

def count_params(arch: ArchSpec) -> CostReport:
    """This function counts parameters per stage at the architecture's own
    resolution. The madds columns are left at zero.

    Args:
        arch:
            The architecture.

    Returns:
        The parameter report.
    """
    res = tuple(arch.input_res)
    rows = _stage_rows(arch, res)
    for row in rows:
        row.madds = 0
        row.components = _zero()
    return _report(arch, res, rows)

def count_madds(arch: ArchSpec, resolution: Optional[Union[int, Sequence[int]]] = None) -> CostReport:
    """This function counts parameters and multiply-adds per stage.

    Args:
        arch:
            The architecture.

        resolution:
            Input (H, W) or a square side; defaults to arch.input_res. Attention
            architectures only accept their own resolution.

    Returns:
        The full cost report.
    """
    res = normalize_res(arch.input_res if resolution is None else resolution)
    check_resolution(arch, res)
    report = _report(arch, res, _stage_rows(arch, res))
    logging.debug(
        f'{arch.name} @{res[0]}x{res[1]}: {report.totals.params} params, {report.totals.madds} madds'
    )
    return report
