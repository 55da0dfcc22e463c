"""This module forms the interface for logging. Records go to the stdlib logger
`botkit.log`, which only carries a NullHandler until the entry point attaches a
file handler, so library use stays silent."""
from contextlib import contextmanager
from datetime import datetime
from enum import Enum
import inspect
import logging
import time
from typing import Any, Iterator

LOGGER = logging.getLogger('botkit.log')
LOGGER.addHandler(logging.NullHandler())

class LogLevel(Enum):
    """This class is enum for the listed log levels."""
    CRITICAL = 50
    ERROR = 40
    WARNING = 30
    INFO = 20
    DEBUG = 10

def critical(item: Any = ''):
    """Logs a critical item."""
    _log(item, LogLevel.CRITICAL)

def error(item: Any = ''):
    """Logs an error item, typically a rejected input or a traceback."""
    _log(item, LogLevel.ERROR)

def warning(item: Any = ''):
    """Logs a warning item."""
    _log(item, LogLevel.WARNING)

def info(item: Any = ''):
    """Logs an information item."""
    _log(item, LogLevel.INFO)

def debug(item: Any = ''):
    """Logs a debugging item."""
    _log(item, LogLevel.DEBUG)

@contextmanager
def timed(label: str) -> Iterator[None]:
    """This function logs the wall time of the enclosed block at info level,
    attributed to the caller of the with statement.

    Args:
        label:
            What is being timed.
    """
    begin = time.perf_counter()
    try:
        yield
    finally:
        _log(f'{label}: {time.perf_counter() - begin:.3f}s', LogLevel.INFO, depth=3)

def format_line(level: LogLevel, filename: str, lineno: int, function: str, line: str) -> str:
    """LEVEL|timestamp|pkg/file.py:Lline|function|message"""
    short_filename = '/'.join(filename.strip().split('/')[-2:])
    return f'{level.name}|{datetime.now().isoformat()}|{short_filename}:L{lineno}|{function}|{line}'

def _log(item: Any, level: LogLevel, depth: int = 2):
    """This is the common sink of every level function. The caller is found by
    walking `depth` frames up from here, so the record names the code that logged
    rather than this module. Multi-line items become one record per line.

    Args:
        item:
            Anything that has __str__.

        level:
            A `LogLevel` enum indicating what log level to use.

        depth:
            Frames between this function and the caller to report.
    """
    if not LOGGER.isEnabledFor(level.value):
        return

    frame = inspect.currentframe()
    for _ in range(depth):
        frame = frame.f_back
    filename, lineno, function = frame.f_code.co_filename, frame.f_lineno, frame.f_code.co_name
    del frame

    for line in str(item).split('\n'):
        LOGGER.log(level.value, format_line(level, filename, lineno, function, line))
