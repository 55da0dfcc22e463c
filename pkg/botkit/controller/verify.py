#!/usr/bin/python3
"""This module implements the verification suites: gradients against finite
differences, vectorized layers against loop oracles, structural invariants and
the cost figures. Every check becomes one report row; the report passes when
every row does."""
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from botkit.attention import (
    MHSAParams,
    NonLocalParams,
    brute_relative_logits,
    init_mhsa_params,
    init_nonlocal_params,
    mhsa2d,
    naive_mhsa,
    nonlocal_layer,
    nonlocal_via_mhsa,
    permute_positions,
    relative_logits_2d,
)
from botkit.audit import logging
from botkit.backbone import build_backbone, stage_shapes
from botkit.blocks import apply_block, init_block_params, se_gate
from botkit.costmodel import count_madds, count_params, measure_costs, table_params
from botkit.errors import ConfigurationError, GradCheckError
from botkit.schema import BlockSpec, MHSAConfig, VerifyReport, VerifyRow
from botkit.tensor import DifferentiableGraph, Tensor, check_function, conv2d, normal
from .config import Settings

SUITES = ('grad', 'oracle', 'invariants', 'cost')
DEFAULT_DEPTHS = (50, 101, 152)

def measured_row(name: str, measured: float, threshold: float, detail: str = '') -> VerifyRow:
    """A row that passes when measured <= threshold."""
    status = 'pass' if measured <= threshold else 'fail'
    return VerifyRow(name=name, status=status, measured=float(measured), threshold=threshold, detail=detail)

def flag_row(name: str, holds: bool, detail: str = '') -> VerifyRow:
    """A row for a yes/no property: measured 0 when it holds."""
    return measured_row(name, 0.0 if holds else 1.0, 0.0, detail)

def relative_row(name: str, value: float, target: float, tolerance: float) -> VerifyRow:
    """A row comparing value to a published figure within a relative tolerance."""
    return measured_row(name, abs(value - target) / abs(target), tolerance, f'{value:.6g} vs {target:.6g}')

def _bot_spec(stride: int, fm_h: int, fm_w: int) -> BlockSpec:
    return BlockSpec(
        kind='bot', in_channels=8, mid_channels=4, out_channels=16, stride=stride, activation='silu',
        attention=MHSAConfig(d_model=4, heads=4, fm_h=fm_h, fm_w=fm_w),
    )

def _grad_cases() -> Dict[str, Callable[[int], tuple]]:
    """Check name to a function of the seed giving (forward, inputs)."""
    cases = {}

    def mhsa_case(pos_mode):
        config = MHSAConfig(d_model=8, heads=4, fm_h=4, fm_w=5, pos_mode=pos_mode)

        def build(seed):
            inputs = dict(init_mhsa_params(config, seed=seed).records())
            inputs['x'] = normal(seed, 'verify.x', (2, 8, 4, 5))
            return (lambda x, **records: mhsa2d(x, MHSAParams(**records), config)), inputs
        return build

    def nonlocal_case(value_projection):
        def build(seed):
            inputs = dict(init_nonlocal_params(8, seed=seed, value_projection=value_projection).records())
            inputs['x'] = normal(seed, 'verify.x', (2, 8, 2, 3))
            return (lambda x, **records: nonlocal_layer(x, NonLocalParams(**records))), inputs
        return build

    def block_case(spec, shape):
        def build(seed):
            inputs = init_block_params(spec, seed=seed)
            inputs['x'] = normal(seed, 'verify.x', shape)
            return (lambda x, **params: apply_block(x, spec, params)), inputs
        return build

    def se_build(seed):
        inputs = {
            'w1': normal(seed, 'verify.se.w1', (2, 8)),
            'w2': normal(seed, 'verify.se.w2', (8, 2)),
            'x': normal(seed, 'verify.x', (2, 8, 3, 3)),
        }
        return (lambda x, **params: se_gate(x, params, ratio=4, kind='silu')), inputs

    for pos_mode in ('relative', 'absolute', 'none'):
        cases[f'grad/mhsa2d[{pos_mode}]'] = mhsa_case(pos_mode)
    cases['grad/nonlocal_layer'] = nonlocal_case(False)
    cases['grad/nonlocal_layer[value_projection]'] = nonlocal_case(True)
    cases['grad/bot_block[stride=1]'] = block_case(_bot_spec(1, 4, 5), (1, 8, 4, 5))
    cases['grad/bot_block[stride=2]'] = block_case(_bot_spec(2, 4, 4), (1, 8, 4, 4))
    cases['grad/bottleneck_block[stride=1]'] = block_case(
        BlockSpec(in_channels=8, mid_channels=2, out_channels=8, activation='silu'), (1, 8, 4, 5)
    )
    cases['grad/bottleneck_block[stride=2]'] = block_case(
        BlockSpec(in_channels=8, mid_channels=2, out_channels=8, stride=2, activation='silu'), (1, 8, 4, 4)
    )
    cases['grad/se_gate'] = se_build
    return cases

def grad_rows(seed: int, seeds: int, h: float) -> List[VerifyRow]:
    """This function checks analytic gradients of every layer and block against
    central differences, taking the worst error over consecutive seeds.

    Args:
        seed:
            First seed.

        seeds:
            Number of seeds.

        h:
            Finite-difference step.

    Returns:
        One row per layer configuration.
    """
    rows = []
    for name, build in _grad_cases().items():
        worst, detail = 0.0, ''
        for run in range(seed, seed + seeds):
            forward, inputs = build(run)
            try:
                result = check_function(forward, inputs, seed=run, h=h)
            except GradCheckError as error:
                worst, detail = float('inf'), str(error)
                break
            if result.max_rel_error > worst:
                worst = result.max_rel_error
                detail = f'seed {run}, {result.coordinates} coordinates'
        rows.append(measured_row(name, worst, 1e-6, detail))
    return rows

def oracle_rows(seed: int) -> List[VerifyRow]:
    """Vectorized layers against explicit loops."""
    rng = np.random.default_rng(seed)
    rows = []

    worst = 0.0
    for height in range(1, 7):
        for width in range(1, 7):
            q = rng.standard_normal((1, 2, height * width, 3))
            r_h, r_w = rng.standard_normal((2 * height - 1, 3)), rng.standard_normal((2 * width - 1, 3))
            logits = relative_logits_2d(Tensor(q), Tensor(r_h), Tensor(r_w), height, width).numpy()
            worst = max(worst, float(np.abs(logits - brute_relative_logits(q, r_h, r_w, height, width)).max()))
    rows.append(measured_row('oracle/relative_logits_2d', worst, 1e-12, 'H, W in 1..6'))

    x = rng.standard_normal((2, 8, 3, 3))
    for pos_mode, content in (('relative', True), ('absolute', True), ('none', True), ('relative', False)):
        config = MHSAConfig(d_model=8, heads=2, fm_h=3, fm_w=3, pos_mode=pos_mode, content_logits=content)
        params = init_mhsa_params(config, seed=seed)
        error = np.abs(mhsa2d(Tensor(x), params, config).numpy() - naive_mhsa(x, params, config)).max()
        name = f'oracle/mhsa2d[{pos_mode}]' if content else f'oracle/mhsa2d[{pos_mode},position-only]'
        rows.append(measured_row(name, error, 1e-11))

    params = init_nonlocal_params(8, seed=seed)
    x = Tensor(rng.standard_normal((2, 8, 3, 2)))
    error = np.abs(nonlocal_layer(x, params).numpy() - nonlocal_via_mhsa(x, params).numpy()).max()
    rows.append(measured_row('oracle/nonlocal_layer[single-head attention]', error, 1e-11))
    return rows

def layer_invariant_rows(seed: int) -> List[VerifyRow]:
    """Softmax normalization, permutation equivariance, zero tables and the
    single-position layer."""
    rng = np.random.default_rng(seed)
    rows = []

    config = MHSAConfig(d_model=8, heads=2, fm_h=3, fm_w=3)
    params = init_mhsa_params(config, seed=seed)
    x = rng.standard_normal((1, 8, 3, 3))
    with DifferentiableGraph() as graph:
        mhsa2d(Tensor(x * 50.0), params, config)
    weights = [node.output.numpy() for node in graph.nodes if node.op == 'softmax_lastdim']
    rows.append(measured_row('invariants/softmax_rows', float(np.abs(weights[0].sum(axis=-1) - 1.0).max()), 1e-9))

    free = MHSAConfig(d_model=8, heads=2, fm_h=3, fm_w=4, pos_mode='none')
    free_params = init_mhsa_params(free, seed=seed)
    x = rng.standard_normal((2, 8, 3, 4))
    reference = mhsa2d(Tensor(x), free_params, free).numpy()
    worst = 0.0
    for _ in range(10):
        permutation = rng.permutation(12)
        permuted = mhsa2d(Tensor(permute_positions(x, permutation)), free_params, free).numpy()
        worst = max(worst, float(np.abs(permuted - permute_positions(reference, permutation)).max()))
    rows.append(measured_row('invariants/permutation_equivariance', worst, 1e-9, '10 permutations'))

    none = MHSAConfig(d_model=8, heads=2, fm_h=3, fm_w=3, pos_mode='none')
    zeroed = MHSAParams(
        wq=params.wq, wk=params.wk, wv=params.wv,
        r_h=Tensor(np.zeros((5, 4))), r_w=Tensor(np.zeros((5, 4))),
    )
    x = Tensor(rng.standard_normal((1, 8, 3, 3)))
    difference = np.abs(mhsa2d(x, zeroed, config).numpy() - mhsa2d(x, zeroed, none).numpy()).max()
    rows.append(measured_row('invariants/zero_tables', difference, 0.0))

    single = MHSAConfig(d_model=8, heads=2, fm_h=1, fm_w=1)
    single_params = init_mhsa_params(single, seed=seed)
    x = Tensor(rng.standard_normal((2, 8, 1, 1)))
    difference = np.abs(mhsa2d(x, single_params, single).numpy() - conv2d(x, single_params.wv).numpy()).max()
    rows.append(measured_row('invariants/single_position', difference, 0.0))
    return rows

def replacement_rows(depths: Sequence[Union[int, str]]) -> List[VerifyRow]:
    """BoTNet with no replaced block is the plain ResNet of the same depth."""
    rows = []
    for depth in depths:
        botnet = build_backbone('botnet', depth, [0, 0, 0], 224)
        resnet = build_backbone('resnet', depth, None, 224)
        same = (
            botnet.structure() == resnet.structure()
            and count_params(botnet).totals.params == count_params(resnet).totals.params
            and stage_shapes(botnet) == stage_shapes(resnet)
        )
        rows.append(flag_row(f'invariants/empty_replacement[{depth}]', same))
    return rows

def cost_rows(seed: int) -> List[VerifyRow]:
    """Published cost figures, scaling of the terms and the metered cross-check."""
    rows = []
    resnet_224 = count_madds(build_backbone('resnet', 50, None, 224))
    botnet_224 = count_madds(build_backbone('botnet', 50, None, 224))
    s1_224 = count_madds(build_backbone('botnet_s1', 50, None, 224))
    resnet_1024 = count_madds(build_backbone('resnet', 50, None, 1024))
    botnet_1024 = count_madds(build_backbone('botnet', 50, None, 1024))

    rows.append(relative_row('cost/params/ResNet-50', resnet_224.totals.params, 25.5e6, 0.01))
    rows.append(relative_row('cost/params/BoTNet-50', botnet_1024.totals.params, 20.8e6, 0.01))
    rows.append(relative_row('cost/params/BoTNet-S1-50', s1_224.totals.params, 20.8e6, 0.01))

    s1_arch, bot_arch = build_backbone('botnet_s1', 50, None, 224), build_backbone('botnet', 50, None, 224)
    tables = sum(table_params(spec) for spec in s1_arch.blockgroups[3])
    tables -= sum(table_params(spec) for spec in bot_arch.blockgroups[3])
    rows.append(flag_row(
        'cost/params/stride_independent',
        s1_224.totals.params - botnet_224.totals.params == tables,
        'BoTNet-S1-50 and BoTNet-50 differ only by position tables',
    ))
    for depth in DEFAULT_DEPTHS:
        botnet = count_params(build_backbone('botnet', depth, None, 1024)).totals.params
        resnet = count_params(build_backbone('resnet', depth, None, 1024)).totals.params
        rows.append(measured_row(f'cost/params/bot_smaller[{depth}]', botnet - resnet, -1, 'BoT minus conv'))

    rows.append(relative_row('cost/madds/ResNet-50@224', resnet_224.totals.madds, 3.86e9, 0.10))
    rows.append(relative_row('cost/madds/BoTNet-50@224', botnet_224.totals.madds, 3.79e9, 0.10))
    rows.append(flag_row(
        'cost/madds/ordering@224',
        botnet_224.totals.madds < resnet_224.totals.madds < s1_224.totals.madds,
        'BoTNet-50 < ResNet-50 < BoTNet-S1-50',
    ))
    rows.append(relative_row(
        'cost/madds/delta@224', botnet_224.totals.madds - resnet_224.totals.madds, -0.07e9, 0.25
    ))
    rows.append(relative_row('cost/madds/ResNet-50@1024', resnet_1024.totals.madds, 85.4e9, 0.10))
    rows.append(relative_row('cost/madds/BoTNet-50@1024', botnet_1024.totals.madds, 102.98e9, 0.10))
    rows.append(relative_row(
        'cost/madds/delta@1024', botnet_1024.totals.madds - resnet_1024.totals.madds, 17.58e9, 0.10
    ))

    small = count_madds(build_backbone('botnet', 50, None, 256))
    large = count_madds(build_backbone('botnet', 50, None, 512))
    rows.append(flag_row(
        'cost/scaling/conv_stages',
        all(large.row(stage).madds == 4 * small.row(stage).madds for stage in ('c1', 'c2', 'c3', 'c4')),
        'x4 when the side doubles',
    ))
    rows.append(flag_row(
        'cost/scaling/attention_logits',
        large.component('attn_content') == 16 * small.component('attn_content'),
        'x16 when the side doubles',
    ))

    arch = build_backbone('botnet', 50, None, 64, width_divisor=8)
    counted, measured = count_madds(arch), measure_costs(arch, seed=seed)
    difference = abs(counted.totals.madds - measured.totals.madds) + abs(counted.totals.params - measured.totals.params)
    rows.append(measured_row('cost/metered_forward', difference, 0, f'{arch.name} at 64x64, width / 8'))
    return rows

def verify(
        suite: str = 'all',
        seed: int = 0,
        settings: Optional[Settings] = None,
        depths: Optional[Sequence[Union[int, str]]] = None
    ) -> VerifyReport:
    """This function runs one suite, or all of them.

    Args:
        suite:
            grad, oracle, invariants, cost or all.

        seed:
            Seed of every random draw.

        settings:
            Supplies the finite-difference step and the seed count.

        depths:
            Depth matrix of the empty-replacement invariant; defaults to 50, 101
            and 152. An empty matrix contributes no rows.

    Returns:
        The report.
    """
    if suite != 'all' and suite not in SUITES:
        raise ConfigurationError(f'unknown suite {suite}; expected one of {", ".join(SUITES + ("all",))}')
    settings = settings or Settings()
    depths = DEFAULT_DEPTHS if depths is None else depths
    selected = SUITES if suite == 'all' else (suite,)

    rows: List[VerifyRow] = []
    for name in selected:
        logging.info(f'running suite {name} with seed {seed}')
        if name == 'grad':
            rows += grad_rows(seed, settings.verify_seeds, settings.verify_h)
        elif name == 'oracle':
            rows += oracle_rows(seed)
        elif name == 'invariants':
            rows += layer_invariant_rows(seed) + replacement_rows(depths)
        else:
            rows += cost_rows(seed)

    for row in rows:
        if row.status != 'pass':
            logging.warning(f'{row.name} failed: measured {row.measured} threshold {row.threshold} {row.detail}')
    return VerifyReport(suite=suite, seed=seed, rows=rows, passed=all(row.status == 'pass' for row in rows))
