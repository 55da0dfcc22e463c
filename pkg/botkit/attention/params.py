#!/usr/bin/python3
"""This module implements the parameter containers of the attention layers, their
random initialization and their mapping to stable record names."""
from dataclasses import dataclass, fields
from typing import Dict, Mapping, Optional

from botkit.errors import ConfigurationError, ParameterError
from botkit.schema import MHSAConfig
from botkit.tensor import Tensor, normal

MHSA_RECORDS = ('wq', 'wk', 'wv', 'r_h', 'r_w', 'p_abs')

@dataclass(frozen=True)
class MHSAParams:
    """Query, key and value projections stored as 1x1 convolution kernels
    (d_model, d_model, 1, 1), plus the position tables the mode needs. There is
    no output projection."""
    wq: Tensor
    wk: Tensor
    wv: Tensor
    r_h: Optional[Tensor] = None
    r_w: Optional[Tensor] = None
    p_abs: Optional[Tensor] = None

    def records(self) -> Dict[str, Tensor]:
        """Named records, absent tables omitted."""
        return {
            field.name: getattr(self, field.name)
            for field in fields(self) if getattr(self, field.name) is not None
        }

    @classmethod
    def from_records(cls, records: Mapping[str, Tensor]) -> 'MHSAParams':
        """Builds the container from named records."""
        try:
            return cls(**{name: records[name] for name in records if name in MHSA_RECORDS})
        except TypeError as error:
            raise ParameterError(f'incomplete attention parameters: {error}') from error

    def validate(self, config: MHSAConfig):
        """This method checks every tensor against the configuration.

        Args:
            config:
                The attention geometry the parameters must fit.
        """
        d = config.d_model
        for name in ('wq', 'wk', 'wv'):
            if getattr(self, name).shape != (d, d, 1, 1):
                raise ParameterError(f'{name} has shape {getattr(self, name).shape}, expected {(d, d, 1, 1)}')

        if config.pos_mode == 'relative':
            expected = {'r_h': 2 * config.fm_h - 1, 'r_w': 2 * config.fm_w - 1}
            for name, length in expected.items():
                table = getattr(self, name)
                if table is None or table.shape != (length, config.d_head):
                    shape = None if table is None else table.shape
                    raise ConfigurationError(
                        f'relative table {name} has shape {shape}, expected {(length, config.d_head)}'
                    )
        elif config.pos_mode == 'absolute':
            expected_shape = (config.positions, config.d_head)
            if self.p_abs is None or self.p_abs.shape != expected_shape:
                shape = None if self.p_abs is None else self.p_abs.shape
                raise ConfigurationError(f'absolute table has shape {shape}, expected {expected_shape}')

@dataclass(frozen=True)
class NonLocalParams:
    """Embeddings theta and phi (C/2, C, 1, 1), the optional value projection g and
    the output projection z (C, C/2, 1, 1)."""
    theta: Tensor
    phi: Tensor
    z: Tensor
    g: Optional[Tensor] = None

    def records(self) -> Dict[str, Tensor]:
        """Named records, g omitted when absent."""
        records = {'theta': self.theta, 'phi': self.phi, 'z': self.z}
        if self.g is not None:
            records['g'] = self.g
        return records

    @classmethod
    def from_records(cls, records: Mapping[str, Tensor]) -> 'NonLocalParams':
        """Builds the container from named records."""
        try:
            return cls(theta=records['theta'], phi=records['phi'], z=records['z'], g=records.get('g'))
        except KeyError as error:
            raise ParameterError(f'incomplete non-local parameters: missing {error}') from error

def init_mhsa_params(config: MHSAConfig, seed: int = 0, prefix: str = 'mhsa', dtype: str = 'float64') -> MHSAParams:
    """This function draws attention parameters: projections from N(0, d_model^-1/2)
    and position tables from N(0, d_head^-1/2).

    Args:
        config:
            Attention geometry.

        seed:
            Run seed.

        prefix:
            Name prefix keying the random streams.

        dtype:
            Parameter dtype.

    Returns:
        The parameters for `config.pos_mode`.
    """
    d, d_head = config.d_model, config.d_head
    projections = {
        name: normal(seed, f'{prefix}.{name}', (d, d, 1, 1), d ** -0.5, dtype)
        for name in ('wq', 'wk', 'wv')
    }
    tables = {}
    if config.pos_mode == 'relative':
        tables['r_h'] = normal(seed, f'{prefix}.r_h', (2 * config.fm_h - 1, d_head), d_head ** -0.5, dtype)
        tables['r_w'] = normal(seed, f'{prefix}.r_w', (2 * config.fm_w - 1, d_head), d_head ** -0.5, dtype)
    elif config.pos_mode == 'absolute':
        tables['p_abs'] = normal(seed, f'{prefix}.p_abs', (config.positions, d_head), d_head ** -0.5, dtype)
    return MHSAParams(**projections, **tables)

def init_nonlocal_params(
        channels: int,
        seed: int = 0,
        prefix: str = 'nl',
        value_projection: bool = False,
        dtype: str = 'float64'
    ) -> NonLocalParams:
    """This function draws non-local parameters from N(0, fan_in^-1/2).

    Args:
        channels:
            Even input channel count C.

        seed:
            Run seed.

        prefix:
            Name prefix keying the random streams.

        value_projection:
            Also draw the value projection g.

        dtype:
            Parameter dtype.

    Returns:
        The parameters.
    """
    if channels % 2:
        raise ConfigurationError(f'non-local layer needs an even channel count, got {channels}')
    inner = channels // 2
    embed = {
        name: normal(seed, f'{prefix}.{name}', (inner, channels, 1, 1), channels ** -0.5, dtype)
        for name in (('theta', 'phi', 'g') if value_projection else ('theta', 'phi'))
    }
    z = normal(seed, f'{prefix}.z', (channels, inner, 1, 1), inner ** -0.5, dtype)
    return NonLocalParams(z=z, **embed)
