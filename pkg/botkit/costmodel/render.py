#!/usr/bin/python3
"""This module renders cost reports as aligned plain-text tables."""
import os
from itertools import groupby
from typing import List, Optional

import jinja2

from botkit.schema import COMPONENTS, CompareReport, CostReport

def _runs(labels: List[str]) -> str:
    return ', '.join(f'{label} x{len(list(run))}' for label, run in groupby(labels))

def _ratio(value: Optional[float]) -> str:
    return '-' if value is None else f'{value:.3f}'

def get_environment() -> jinja2.Environment:
    """This function loads the table templates and registers their filters.

    Returns:
        Jinja2 environment.
    """
    current_dir = os.path.dirname(os.path.abspath(__file__))
    templates_path = os.path.join(current_dir, '../templates')
    loader = jinja2.FileSystemLoader(searchpath=templates_path)
    environment = jinja2.Environment(loader=loader, keep_trailing_newline=True)
    environment.filters['thousands'] = lambda value: f'{value:,}'
    environment.filters['signed'] = lambda value: f'{value:+,}'
    environment.filters['runs'] = _runs
    environment.filters['ratio'] = _ratio
    return environment

def render_cost(report: CostReport) -> str:
    """Stage table with shapes, block kinds, params and madds plus the
    component breakdown."""
    components = [(name, report.component(name)) for name in COMPONENTS]
    return get_environment().get_template('describe.txt').render(report=report, components=components)

def render_compare(report: CompareReport) -> str:
    """Side-by-side table with deltas a - b and madds ratios."""
    return get_environment().get_template('compare.txt').render(report=report)
