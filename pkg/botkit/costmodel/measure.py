#!/usr/bin/python3
"""This module implements the brute-force counterpart of the closed-form counts:
parameters are summed over the instantiated tensors and multiply-adds are read
off the meter during a real forward pass."""
from typing import Dict

from botkit.audit import logging
from botkit.schema import ArchSpec, CostReport, CostRow, CostTotals
from botkit.tensor import Meter, Tensor, normal
from botkit.backbone import forward_classifier, forward_features, init_params

RUNNING_STATISTICS = ('.mean', '.var')

def stage_of(name: str) -> str:
    """Maps a record name to its report row: stem -> c1, head -> head, cN -> cN."""
    root = name.split('.', 1)[0]
    return 'c1' if root == 'stem' else root

def measure_params(params: Dict[str, Tensor]) -> Dict[str, int]:
    """Sums trainable tensor sizes per stage, skipping batchnorm running statistics."""
    counts: Dict[str, int] = {}
    for name, tensor in params.items():
        if name.endswith(RUNNING_STATISTICS):
            continue
        stage = stage_of(name)
        counts[stage] = counts.get(stage, 0) + tensor.size
    return counts

def measure_costs(arch: ArchSpec, seed: int = 0, dtype: str = 'float64') -> CostReport:
    """This function runs one sample through the architecture under a meter.

    Args:
        arch:
            The architecture; its input_res is used.

        seed:
            Seed of the parameters and the input.

        dtype:
            Compute dtype.

    Returns:
        A report whose rows carry only stage, params and madds.
    """
    params = init_params(arch, seed, dtype)
    x = normal(seed, 'input', (1, 3) + tuple(arch.input_res), 1.0, dtype)
    with Meter() as meter:
        if arch.n_classes is None:
            forward_features(arch, params, x)
        else:
            forward_classifier(arch, params, x)

    param_counts = measure_params(params)
    stages = [stage for stage in ('c1', 'c2', 'c3', 'c4', 'c5', 'head') if stage in param_counts]
    rows = [
        CostRow(stage=stage, params=param_counts[stage], madds=meter.scoped_madds.get(stage, 0))
        for stage in stages
    ]
    unscoped = sum(madds for stage, madds in meter.scoped_madds.items() if stage not in stages)
    if unscoped:
        logging.warning(f'{arch.name}: {unscoped} metered madds outside any stage')
    return CostReport(
        arch=arch.name,
        resolution=tuple(arch.input_res),
        rows=rows,
        totals=CostTotals(params=sum(row.params for row in rows), madds=meter.total_madds),
    )
