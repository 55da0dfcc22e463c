"""This module brings main classes into the namespace"""
from .counter import block_label, block_madds, block_params, count_madds, count_params, table_params
from .measure import measure_costs, measure_params
from .compare import compare
from .reference import PUBLISHED, annotations
from .render import render_compare, render_cost
