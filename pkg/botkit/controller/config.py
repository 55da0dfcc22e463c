#!/usr/bin/python3
"""This module sets and exposes the default values for configuration. Values come
from an optional TOML file and are overridden by BOTKIT_* environment variables."""
import os
from typing import Any, Dict, Optional

import toml
from pydantic import BaseSettings, validator

from botkit.audit import logging
from botkit.errors import ConfigurationError

DEFAULT_CONFIG_PATH = 'botkit.toml'

class Settings(BaseSettings):
    """Runtime settings"""
    threads: int = 1
    log_dir: str = os.path.join(os.path.dirname(os.path.abspath(__file__)), '../log')
    log_level: str = 'INFO'
    dtype: str = 'float32'
    verify_h: float = 1e-5
    verify_seeds: int = 5

    class Config:
        """Environment binding"""
        env_prefix = 'BOTKIT_'

    @validator('threads')
    def threads_positive(cls, value): # pylint: disable=no-self-argument
        """Worker count must be at least one."""
        if value < 1:
            raise ValueError('threads must be >= 1')
        return value

    @validator('dtype')
    def dtype_known(cls, value): # pylint: disable=no-self-argument
        """Only the two engine dtypes are accepted."""
        if value not in ('float32', 'float64'):
            raise ValueError(f'unsupported dtype {value}')
        return value

    @validator('verify_h')
    def step_in_range(cls, value): # pylint: disable=no-self-argument
        """Finite-difference step bounds."""
        if not 1e-6 <= value <= 1e-4:
            raise ValueError('verify_h must be within [1e-6, 1e-4]')
        return value

def read_config_file(path: Optional[str] = None) -> Dict[str, Any]:
    """This function reads the [botkit] table of a TOML configuration file.

    Args:
        path:
            File to read. When omitted, botkit.toml in the working directory is used
            if it exists.

    Returns:
        A dictionary of setting names to values.
    """
    if path is None:
        if not os.path.exists(DEFAULT_CONFIG_PATH):
            return {}
        path = DEFAULT_CONFIG_PATH

    try:
        document = toml.load(path)
    except (OSError, toml.TomlDecodeError) as error:
        raise ConfigurationError(f'failed to read {path}: {error}') from error

    return document.get('botkit', document)

def get_settings(path: Optional[str] = None) -> Settings:
    """This function builds the settings object. Environment variables take
    precedence over values from the file.

    Args:
        path:
            Optional TOML file path.

    Returns:
        A validated settings object.
    """
    values = read_config_file(path)
    for name in Settings.__fields__:
        if f'BOTKIT_{name.upper()}' in os.environ:
            values.pop(name, None)

    try:
        settings = Settings(**values)
    except ValueError as error:
        raise ConfigurationError(str(error)) from error

    logging.debug(f'settings: {settings.dict()}')
    return settings
