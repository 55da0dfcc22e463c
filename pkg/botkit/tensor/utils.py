#!/usr/bin/python3
"""This module implements reproducible, name-keyed random tensors. Every tensor is
drawn from its own Philox stream whose key is the digest of the run seed and the
tensor name, so a value never depends on how many other tensors were drawn first."""
from hashlib import sha256
from typing import Sequence

import numpy as np

from .core import Tensor

def get_key_from_str(seed: int, name: str) -> int:
    """This function derives a 128-bit generator key from a seed and a name.

    Args:
        seed:
            Run seed.

        name:
            Stable tensor name such as 'c5.0.mhsa.wq'.

    Returns:
        The key as an integer.
    """
    _hash = sha256()
    _hash.update(f'{seed}:{name}'.encode())
    digest = _hash.hexdigest()
    return int(digest[0:32], 16)

def get_generator(seed: int, name: str) -> np.random.Generator:
    """Returns the counter-based generator for one tensor."""
    return np.random.Generator(np.random.Philox(key=get_key_from_str(seed, name)))

def normal(seed: int, name: str, shape: Sequence[int], std: float = 1.0, dtype: str = 'float64') -> Tensor:
    """Zero-mean normal tensor with standard deviation `std`."""
    return Tensor(get_generator(seed, name).standard_normal(tuple(shape)) * std, dtype=dtype)

def uniform(seed: int, name: str, shape: Sequence[int], low: float, high: float, dtype: str = 'float64') -> Tensor:
    """Uniform tensor on [low, high)."""
    return Tensor(get_generator(seed, name).uniform(low, high, tuple(shape)), dtype=dtype)
