#!/usr/bin/python3
"""This module implements the compare command."""
from typing import Sequence, Union

from botkit.costmodel import compare, render_compare
from .common import EXIT_SUCCESS, Outcome, resolve_arch

def cmd_compare(
        spec_a: str,
        spec_b: str,
        res: Union[int, Sequence[int], None] = None,
        output_format: str = 'text',
        **options
    ) -> Outcome:
    """Stage-aligned deltas a - b at one resolution; both specs are built at
    `res` unless they are documents carrying their own."""
    arch_a = resolve_arch(spec_a, res=res, **options)
    arch_b = resolve_arch(spec_b, res=res, **options)
    report = compare(arch_a, arch_b, res)
    if output_format == 'json':
        return report.json(indent=2), EXIT_SUCCESS
    return render_compare(report), EXIT_SUCCESS
