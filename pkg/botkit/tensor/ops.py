#!/usr/bin/python3
"""This module implements the op set used by every block. Each op has a numpy
kernel, a vector-Jacobian product rule and, where it multiplies, a multiply-add
count. The public functions validate shapes and raise botkit errors; the
registered kernels assume valid input.

Reductions never depend on threading: every kernel is a single numpy call (or a
fixed-order loop of them) on the calling thread."""
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from botkit.errors import (
    ConfigurationError,
    DimensionError,
    ParameterError,
    ShapeError,
    UnsupportedShapeError,
)
from .core import Tensor, operation

ACTIVATIONS = ('relu', 'silu', 'sigmoid')

def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """This function sums a broadcast gradient back down to `shape`.

    Args:
        grad:
            Gradient with the broadcast shape.

        shape:
            Shape of the operand before broadcasting.

    Returns:
        Gradient with shape `shape`.
    """
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad

def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))

# matmul

def _matmul_madds(a_shape, b_shape):
    batch = np.broadcast_shapes(a_shape[:-2], b_shape[:-2])
    return int(np.prod(batch, dtype=np.int64)) * a_shape[-2] * a_shape[-1] * b_shape[-1]

@operation('matmul', madds=_matmul_madds)
def _matmul(a, b):
    return np.matmul(a, b)

@_matmul.defvjp
def _matmul_vjp(grad, a, b, out):
    return (
        unbroadcast(np.matmul(grad, np.swapaxes(b, -1, -2)), a.shape),
        unbroadcast(np.matmul(np.swapaxes(a, -1, -2), grad), b.shape),
    )

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """This function multiplies matrices, batched over broadcastable leading dims.
    The accumulation order for an output element is fixed for a given shape.

    Args:
        a:
            Tensor[..., m, k].

        b:
            Tensor[..., k, n].

    Returns:
        Tensor[..., m, n].
    """
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f'matmul: cannot multiply {a.shape} by {b.shape}')
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as error:
        raise DimensionError(f'matmul: cannot multiply {a.shape} by {b.shape}') from error
    return _matmul(a, b)

# conv2d

def _conv_out(extent: int, kernel: int, stride: int, pad: int) -> int:
    return (extent + 2 * pad - kernel) // stride + 1

def _conv2d_madds(x_shape, w_shape, stride, pad):
    n, cin, h, w = x_shape
    cout, _, kh, kw = w_shape
    return n * cout * cin * kh * kw * _conv_out(h, kh, stride, pad) * _conv_out(w, kw, stride, pad)

def _windows(x, kh, kw, stride, pad):
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    return sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]

@operation('conv2d', madds=_conv2d_madds)
def _conv2d(x, w, stride, pad):
    _, _, kh, kw = w.shape
    if kh == 1 and kw == 1 and pad == 0:
        out = np.tensordot(w[:, :, 0, 0], x[:, :, ::stride, ::stride], axes=([1], [1]))
        return out.transpose(1, 0, 2, 3)
    out = np.tensordot(_windows(x, kh, kw, stride, pad), w, axes=([1, 4, 5], [1, 2, 3]))
    return out.transpose(0, 3, 1, 2)

@_conv2d.defvjp
def _conv2d_vjp(grad, x, w, out, stride, pad):
    n, cin, h, wd = x.shape
    _, _, kh, kw = w.shape
    ho, wo = grad.shape[2], grad.shape[3]

    grad_w = np.tensordot(grad, _windows(x, kh, kw, stride, pad), axes=([0, 2, 3], [0, 2, 3]))

    grad_xp = np.zeros((n, cin, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            contribution = np.tensordot(w[:, :, i, j], grad, axes=([0], [1])).transpose(1, 0, 2, 3)
            grad_xp[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride] \
                += contribution
    grad_x = grad_xp[:, :, pad:pad + h, pad:pad + wd]
    return grad_x, grad_w

def conv2d(x: Tensor, w: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """This function computes a 2D cross-correlation without bias.

    Args:
        x:
            Tensor[N, Cin, H, W].

        w:
            Tensor[Cout, Cin, kh, kw].

        stride:
            Step in both spatial directions.

        pad:
            Zero padding on every spatial border.

    Returns:
        Tensor[N, Cout, H', W'] with H' = floor((H + 2 pad - kh) / stride) + 1.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(f'conv2d: expected 4D input and weights, got {x.shape} and {w.shape}')
    if x.shape[1] != w.shape[1]:
        raise DimensionError(f'conv2d: input {x.shape} does not match weights {w.shape}')
    if stride < 1 or pad < 0:
        raise ShapeError(f'conv2d: invalid stride {stride} or pad {pad}')
    height = _conv_out(x.shape[2], w.shape[2], stride, pad)
    width = _conv_out(x.shape[3], w.shape[3], stride, pad)
    if height < 1 or width < 1:
        raise ShapeError(
            f'conv2d: kernel {w.shape[2:]} with stride {stride} and pad {pad} '
            f'leaves no output for input {x.shape[2:]}'
        )
    return _conv2d(x, w, stride=stride, pad=pad)

# pooling

@operation('avg_pool2d')
def _avg_pool2d(x):
    n, c, h, w = x.shape
    return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

@_avg_pool2d.defvjp
def _avg_pool2d_vjp(grad, x, out):
    return (np.repeat(np.repeat(grad, 2, axis=2), 2, axis=3) / 4.0,)

def avg_pool2d(x: Tensor, kernel: int = 2, stride: int = 2) -> Tensor:
    """This function averages non-overlapping 2x2 windows.

    Args:
        x:
            Tensor[N, C, H, W] with H and W even.

        kernel:
            Must be 2.

        stride:
            Must be 2.

    Returns:
        Tensor[N, C, H/2, W/2].
    """
    if kernel != 2 or stride != 2:
        raise UnsupportedShapeError(f'avg_pool2d: only 2x2 windows with stride 2, got {kernel}/{stride}')
    if x.ndim != 4:
        raise DimensionError(f'avg_pool2d: expected 4D input, got {x.shape}')
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise UnsupportedShapeError(f'avg_pool2d: odd spatial extent {x.shape[2:]} is not supported')
    return _avg_pool2d(x)

@operation('max_pool2d')
def _max_pool2d(x, kernel, stride, pad):
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf)
    return sliding_window_view(x, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride].max(axis=(4, 5))

@_max_pool2d.defvjp
def _max_pool2d_vjp(grad, x, out, kernel, stride, pad):
    n, c, h, w = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf)
    windows = sliding_window_view(padded, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = windows.shape[2], windows.shape[3]
    # ties go to the first maximum in row-major window order
    winner = windows.reshape(n, c, ho, wo, kernel * kernel).argmax(axis=4)

    index_n, index_c, index_h, index_w = np.indices((n, c, ho, wo))
    rows = index_h * stride + winner // kernel
    cols = index_w * stride + winner % kernel

    grad_padded = np.zeros(padded.shape, dtype=x.dtype)
    np.add.at(grad_padded, (index_n, index_c, rows, cols), grad)
    return (grad_padded[:, :, pad:pad + h, pad:pad + w],)

def max_pool2d(x: Tensor, kernel: int = 3, stride: int = 2, pad: int = 1) -> Tensor:
    """This function takes window maxima with -inf padding.

    Args:
        x:
            Tensor[N, C, H, W].

        kernel:
            Window extent.

        stride:
            Window step.

        pad:
            Padding on every spatial border; must be smaller than the window.

    Returns:
        Tensor[N, C, H', W'].
    """
    if x.ndim != 4:
        raise DimensionError(f'max_pool2d: expected 4D input, got {x.shape}')
    if pad >= kernel or stride < 1:
        raise ShapeError(f'max_pool2d: invalid kernel {kernel}, stride {stride}, pad {pad}')
    if _conv_out(x.shape[2], kernel, stride, pad) < 1 or _conv_out(x.shape[3], kernel, stride, pad) < 1:
        raise ShapeError(f'max_pool2d: window {kernel} leaves no output for {x.shape[2:]}')
    return _max_pool2d(x, kernel=kernel, stride=stride, pad=pad)

@operation('global_avg_pool')
def _global_avg_pool(x):
    return x.mean(axis=(2, 3))

@_global_avg_pool.defvjp
def _global_avg_pool_vjp(grad, x, out):
    h, w = x.shape[2], x.shape[3]
    return (np.broadcast_to(grad[:, :, None, None] / (h * w), x.shape).copy(),)

def global_avg_pool(x: Tensor) -> Tensor:
    """This function averages every channel over all spatial positions.

    Args:
        x:
            Tensor[N, C, H, W].

    Returns:
        Tensor[N, C].
    """
    if x.ndim != 4:
        raise DimensionError(f'global_avg_pool: expected 4D input, got {x.shape}')
    return _global_avg_pool(x)

# normalization and activations

def _per_channel(vector, ndim):
    return vector.reshape((1, -1) + (1,) * (ndim - 2))

@operation('batchnorm_affine')
def _batchnorm_affine(x, gamma, beta, mean, var, eps):
    ndim = x.ndim
    centered = x - _per_channel(mean, ndim)
    normalized = centered / np.sqrt(_per_channel(var, ndim) + eps)
    return normalized * _per_channel(gamma, ndim) + _per_channel(beta, ndim)

@_batchnorm_affine.defvjp
def _batchnorm_affine_vjp(grad, x, gamma, beta, mean, var, out, eps):
    ndim = x.ndim
    axes = tuple(axis for axis in range(ndim) if axis != 1)
    std = np.sqrt(var + eps)
    centered = x - _per_channel(mean, ndim)
    normalized = centered / _per_channel(std, ndim)
    grad_x = grad * _per_channel(gamma / std, ndim)
    return (
        grad_x,
        (grad * normalized).sum(axis=axes),
        grad.sum(axis=axes),
        -grad_x.sum(axis=axes),
        (grad * centered).sum(axis=axes) * gamma * -0.5 * (var + eps) ** -1.5,
    )

def batchnorm_affine(
        x: Tensor,
        gamma: Tensor,
        beta: Tensor,
        mean: Tensor,
        var: Tensor,
        eps: float = 1e-5
    ) -> Tensor:
    """This function applies inference-mode batch normalization with supplied
    statistics: (x - mean) / sqrt(var + eps) * gamma + beta per channel.

    Args:
        x:
            Tensor[N, C, ...].

        gamma, beta, mean, var:
            Tensor[C] each; var must be non-negative.

        eps:
            Non-negative stabilizer. var + eps must be positive in every channel,
            so eps=0 is only accepted with strictly positive variances.

    Returns:
        Tensor shaped like x.
    """
    if x.ndim < 2:
        raise DimensionError(f'batchnorm_affine: expected at least 2D input, got {x.shape}')
    channels = x.shape[1]
    for name, vector in (('gamma', gamma), ('beta', beta), ('mean', mean), ('var', var)):
        if vector.shape != (channels,):
            raise ParameterError(f'batchnorm_affine: {name} has shape {vector.shape}, expected ({channels},)')
    if eps < 0 or np.any(var.data < 0):
        raise ParameterError('batchnorm_affine: var and eps must be non-negative')
    if np.any(var.data + eps <= 0):
        raise ParameterError('batchnorm_affine: var + eps must be positive in every channel')
    return _batchnorm_affine(x, gamma, beta, mean, var, eps=eps)

@operation('softmax_lastdim')
def _softmax_lastdim(x):
    shifted = np.exp(x - x.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)

@_softmax_lastdim.defvjp
def _softmax_lastdim_vjp(grad, x, out):
    return (out * (grad - (grad * out).sum(axis=-1, keepdims=True)),)

def softmax_lastdim(x: Tensor) -> Tensor:
    """This function normalizes max-subtracted exponentials along the last dim.
    NaN inputs propagate to the output.

    Args:
        x:
            Tensor[..., k] with k >= 1.

    Returns:
        Tensor shaped like x whose rows sum to 1.
    """
    if x.ndim < 1:
        raise DimensionError('softmax_lastdim: scalar input')
    return _softmax_lastdim(x)

@operation('activation')
def _activation(x, kind):
    if kind == 'relu':
        return np.maximum(x, 0)
    if kind == 'silu':
        return x * _sigmoid(x)
    return _sigmoid(x)

@_activation.defvjp
def _activation_vjp(grad, x, out, kind):
    if kind == 'relu':
        return (grad * (x > 0),)
    gate = _sigmoid(x)
    if kind == 'silu':
        return (grad * (gate + x * gate * (1.0 - gate)),)
    return (grad * gate * (1.0 - gate),)

def activation(x: Tensor, kind: str = 'relu') -> Tensor:
    """This function applies relu, silu (x * sigmoid(x)) or sigmoid elementwise.

    Args:
        x:
            Any tensor.

        kind:
            One of 'relu', 'silu', 'sigmoid'.

    Returns:
        Tensor shaped like x.
    """
    if kind not in ACTIVATIONS:
        raise ConfigurationError(f'unknown activation {kind}')
    return _activation(x, kind=kind)

# structural ops

@operation('add')
def _add(a, b):
    return a + b

@_add.defvjp
def _add_vjp(grad, a, b, out):
    return unbroadcast(grad, a.shape), unbroadcast(grad, b.shape)

def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum with numpy broadcasting."""
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as error:
        raise DimensionError(f'add: cannot broadcast {a.shape} with {b.shape}') from error
    return _add(a, b)

@operation('mul')
def _mul(a, b):
    return a * b

@_mul.defvjp
def _mul_vjp(grad, a, b, out):
    return unbroadcast(grad * b, a.shape), unbroadcast(grad * a, b.shape)

def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product with numpy broadcasting."""
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as error:
        raise DimensionError(f'mul: cannot broadcast {a.shape} with {b.shape}') from error
    return _mul(a, b)

@operation('scale')
def _scale(x, factor):
    return x * factor

@_scale.defvjp
def _scale_vjp(grad, x, out, factor):
    return (grad * factor,)

def scale(x: Tensor, factor: float) -> Tensor:
    """Multiplies by a constant."""
    return _scale(x, factor=float(factor))

@operation('reshape')
def _reshape(x, shape):
    return x.reshape(shape)

@_reshape.defvjp
def _reshape_vjp(grad, x, out, shape):
    return (grad.reshape(x.shape),)

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Row-major reshape."""
    shape = tuple(int(extent) for extent in shape)
    if int(np.prod(shape, dtype=np.int64)) != x.size:
        raise DimensionError(f'reshape: cannot view {x.shape} as {shape}')
    return _reshape(x, shape=shape)

@operation('transpose')
def _transpose(x, axes):
    return x.transpose(axes)

@_transpose.defvjp
def _transpose_vjp(grad, x, out, axes):
    return (grad.transpose(np.argsort(axes)),)

def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    """Permutes axes."""
    axes = tuple(int(axis) for axis in axes)
    if sorted(axes) != list(range(x.ndim)):
        raise DimensionError(f'transpose: {axes} is not a permutation of {x.ndim} axes')
    return _transpose(x, axes=axes)

@operation('gather_lastdim')
def _gather_lastdim(x, index):
    return np.take_along_axis(x, np.broadcast_to(index, x.shape[:-1] + index.shape[-1:]), axis=-1)

@_gather_lastdim.defvjp
def _gather_lastdim_vjp(grad, x, out, index):
    rows = x.shape[-2]
    grad_x = np.zeros((x.size // (rows * x.shape[-1]), rows, x.shape[-1]), dtype=x.dtype)
    flat_grad = grad.reshape(grad_x.shape[0], rows, index.shape[-1])
    batch = np.arange(grad_x.shape[0])[:, None, None]
    row = np.arange(rows)[None, :, None]
    np.add.at(grad_x, (batch, row, np.asarray(index)[None, :, :]), flat_grad)
    return (grad_x.reshape(x.shape),)

def gather_lastdim(x: Tensor, index: np.ndarray) -> Tensor:
    """This function picks, for every row p of the last two dims, the columns
    index[p, :]: out[..., p, a] = x[..., p, index[p, a]].

    Args:
        x:
            Tensor[..., P, L].

        index:
            Integer array[P, A] of positions in [0, L).

    Returns:
        Tensor[..., P, A].
    """
    index = np.asarray(index, dtype=np.int64)
    if x.ndim < 2 or index.ndim != 2 or index.shape[0] != x.shape[-2]:
        raise DimensionError(f'gather_lastdim: index {index.shape} does not fit {x.shape}')
    if index.size and (index.min() < 0 or index.max() >= x.shape[-1]):
        raise DimensionError(f'gather_lastdim: index out of range for {x.shape}')
    return _gather_lastdim(x, index=index)

@operation('sum')
def _sum(x):
    return np.asarray(x.sum())

@_sum.defvjp
def _sum_vjp(grad, x, out):
    return (np.full(x.shape, grad, dtype=x.dtype),)

def total(x: Tensor) -> Tensor:
    """Sums every element into a rank-0 tensor."""
    return _sum(x)

def weighted_sum(x: Tensor, weights: Optional[Tensor] = None) -> Tensor:
    """This function reduces a tensor to the scalar sum(x * weights), the loss
    used by gradient checks.

    Args:
        x:
            Any tensor.

        weights:
            Tensor of the same shape; plain sum when omitted.

    Returns:
        Rank-0 tensor.
    """
    if weights is None:
        return total(x)
    return total(mul(x, weights))
