"""This module brings main classes into the namespace"""
from .logging import LOGGER, LogLevel, format_line, timed
