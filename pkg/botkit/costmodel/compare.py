#!/usr/bin/python3
"""This module implements row-aligned cost comparisons of two architectures."""
from typing import Optional, Sequence, Union

from botkit.errors import ConfigurationError
from botkit.schema import ArchSpec, CompareReport, CompareRow, CostRow
from botkit.backbone import normalize_res
from .counter import count_madds

def _row(stage: str, a: CostRow, b: CostRow) -> CompareRow:
    return CompareRow(
        stage=stage,
        params_a=a.params,
        params_b=b.params,
        params_delta=a.params - b.params,
        madds_a=a.madds,
        madds_b=b.madds,
        madds_delta=a.madds - b.madds,
        madds_ratio=a.madds / b.madds if b.madds else None,
    )

def compare(a: ArchSpec, b: ArchSpec, resolution: Optional[Union[int, Sequence[int]]] = None) -> CompareReport:
    """This function counts two architectures at one resolution and subtracts
    them stage by stage.

    Args:
        a, b:
            The architectures; deltas are a - b.

        resolution:
            Shared input resolution. Without it both architectures must have been
            built for the same input.

    Returns:
        The comparison, with stages present in either report.
    """
    if resolution is None:
        if tuple(a.input_res) != tuple(b.input_res):
            raise ConfigurationError(
                f'mismatched resolutions: {a.name} is built for {a.input_res}, {b.name} for {b.input_res}'
            )
        resolution = a.input_res
    res = normalize_res(resolution)
    report_a, report_b = count_madds(a, res), count_madds(b, res)

    rows = []
    stages = [row.stage for row in report_a.rows]
    stages += [row.stage for row in report_b.rows if row.stage not in stages]
    for stage in stages:
        rows.append(_row(stage, report_a.row(stage) or CostRow(stage=stage), report_b.row(stage) or CostRow(stage=stage)))

    totals = _row(
        'total',
        CostRow(stage='total', params=report_a.totals.params, madds=report_a.totals.madds),
        CostRow(stage='total', params=report_b.totals.params, madds=report_b.totals.madds),
    )
    return CompareReport(arch_a=a.name, arch_b=b.name, resolution=res, rows=rows, totals=totals)
