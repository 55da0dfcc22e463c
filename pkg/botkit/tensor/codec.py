#!/usr/bin/python3
"""This module implements the raw tensor file format and named parameter bundles.

A tensor record is: magic "BOTK", u8 version (1), u8 dtype code (1=f32, 2=f64),
u8 rank, rank little-endian u64 extents, then the packed little-endian values.
A bundle is a sequence of (u32 name length, utf-8 name, tensor record)."""
import math
import struct
from typing import BinaryIO, Dict, Tuple

import numpy as np

from botkit.errors import SerializationError
from .core import Tensor

MAGIC = b'BOTK'
VERSION = 1
DTYPE_CODES = {'float32': 1, 'float64': 2}
CODE_DTYPES = {1: '<f4', 2: '<f8'}
CODE_NAMES = {1: 'float32', 2: 'float64'}

def encode(tensor: Tensor) -> bytes:
    """This function serializes a tensor to a BOTK record.

    Args:
        tensor:
            Tensor to encode.

    Returns:
        The record bytes.
    """
    code = DTYPE_CODES[tensor.dtype]
    header = MAGIC + struct.pack('<BBB', VERSION, code, tensor.ndim)
    header += struct.pack(f'<{tensor.ndim}Q', *tensor.shape)
    return header + tensor.data.astype(CODE_DTYPES[code], copy=False).tobytes()

def decode(buffer: bytes, offset: int = 0) -> Tuple[Tensor, int]:
    """This function parses one BOTK record.

    Args:
        buffer:
            Bytes holding the record.

        offset:
            Position of the record in `buffer`.

    Returns:
        The tensor and the offset just past the record.
    """
    if buffer[offset:offset + 4] != MAGIC:
        raise SerializationError('not a BOTK record: bad magic')
    try:
        version, code, rank = struct.unpack_from('<BBB', buffer, offset + 4)
    except struct.error as error:
        raise SerializationError(f'truncated BOTK header: {error}') from error
    if version != VERSION:
        raise SerializationError(f'unsupported BOTK version {version}')
    if code not in CODE_DTYPES:
        raise SerializationError(f'unknown BOTK dtype code {code}')

    position = offset + 7
    try:
        shape = struct.unpack_from(f'<{rank}Q', buffer, position)
    except struct.error as error:
        raise SerializationError(f'truncated BOTK extents: {error}') from error
    position += 8 * rank

    if any(extent < 1 for extent in shape):
        raise SerializationError(f'BOTK extents must be >= 1, got {shape}')
    count = math.prod(shape)
    dtype = np.dtype(CODE_DTYPES[code])
    if count * dtype.itemsize > len(buffer) - position:
        raise SerializationError(f'truncated BOTK payload for extents {shape}')
    end = position + count * dtype.itemsize

    values = np.frombuffer(buffer, dtype=dtype, count=count, offset=position).reshape(shape)
    return Tensor(values, dtype=CODE_NAMES[code]), end

def write_tensor(path: str, tensor: Tensor):
    """Writes one tensor to a .botk file."""
    with open(path, 'wb') as file:
        file.write(encode(tensor))

def read_tensor(path: str) -> Tensor:
    """Reads a .botk file holding exactly one tensor."""
    try:
        with open(path, 'rb') as file:
            buffer = file.read()
    except OSError as error:
        raise SerializationError(f'{path}: {error}') from error
    tensor, end = decode(buffer)
    if end != len(buffer):
        raise SerializationError(f'{path}: trailing bytes after tensor record')
    return tensor

def write_bundle(file: BinaryIO, tensors: Dict[str, Tensor]):
    """This function writes named tensors as consecutive records, in key order.

    Args:
        file:
            Binary file object open for writing.

        tensors:
            Map of record name to tensor.
    """
    for name in sorted(tensors):
        encoded_name = name.encode('utf-8')
        file.write(struct.pack('<I', len(encoded_name)) + encoded_name)
        file.write(encode(tensors[name]))

def read_bundle(file: BinaryIO) -> Dict[str, Tensor]:
    """This function reads every named record of a bundle.

    Args:
        file:
            Binary file object open for reading.

    Returns:
        Map of record name to tensor.
    """
    buffer = file.read()
    tensors: Dict[str, Tensor] = {}
    position = 0
    while position < len(buffer):
        if position + 4 > len(buffer):
            raise SerializationError('truncated bundle record name')
        (length,) = struct.unpack_from('<I', buffer, position)
        position += 4
        try:
            name = buffer[position:position + length].decode('utf-8')
        except UnicodeDecodeError as error:
            raise SerializationError(f'bad record name: {error}') from error
        position += length
        if name in tensors:
            raise SerializationError(f'duplicate bundle record {name}')
        tensors[name], position = decode(buffer, position)
    return tensors
