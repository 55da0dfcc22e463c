#!/usr/bin/python3
"""This module implements the describe command: the stage table of one
architecture with shapes, block kinds, parameters and multiply-adds."""
from typing import Optional, Sequence, Union

from botkit.backbone import dump_arch
from botkit.costmodel import count_madds, render_cost
from .common import EXIT_SUCCESS, Outcome, resolve_arch

def cmd_describe(
        spec: Optional[str] = None,
        family: Optional[str] = None,
        depth: Union[int, str, None] = None,
        replacement: Optional[str] = None,
        res: Union[int, Sequence[int], None] = None,
        json_path: Optional[str] = None,
        output_format: str = 'text',
        **options
    ) -> Outcome:
    """This function counts an architecture at its input resolution.

    Args:
        spec, family, depth, replacement, res, options:
            Architecture arguments, see resolve_arch.

        json_path:
            Also writes the architecture document here.

        output_format:
            'text' for the table, 'json' for the cost report.

    Returns:
        Output text and exit code.
    """
    arch = resolve_arch(spec, family, depth, replacement, res, **options)
    report = count_madds(arch)
    if json_path is not None:
        dump_arch(json_path, arch)
    if output_format == 'json':
        return report.json(indent=2), EXIT_SUCCESS
    return render_cost(report), EXIT_SUCCESS
