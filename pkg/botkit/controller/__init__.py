"""This module brings main classes into the namespace"""
from .config import Settings, get_settings, read_config_file

from .infer import infer, load_input, parse_shape, random_input, run_forward, summarize

from .verify import SUITES, verify
