#!/usr/bin/python3
"""This module implements forward inference over .botk tensors. Samples of a
batch are independent, so they are spread over a thread pool one sample per
task and joined in batch order; results do not depend on the worker count."""
import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from botkit.audit import logging
from botkit.backbone import check_resolution, forward_classifier, forward_features, init_params, read_params
from botkit.errors import ShapeError
from botkit.schema import ArchSpec, InferSummary
from botkit.tensor import Tensor, encode, normal, read_tensor, write_tensor

def parse_shape(text: str) -> Tuple[int, ...]:
    """Parses 'NxCxHxW' into four positive extents."""
    try:
        shape = tuple(int(extent) for extent in text.lower().split('x'))
    except ValueError as error:
        raise ShapeError(f'malformed shape {text!r}, expected NxCxHxW') from error
    if len(shape) != 4 or any(extent < 1 for extent in shape):
        raise ShapeError(f'malformed shape {text!r}, expected NxCxHxW')
    return shape

def random_input(shape: Sequence[int], seed: int, dtype: str = 'float32') -> Tensor:
    """Standard normal input drawn from its own named stream."""
    return normal(seed, 'input', tuple(shape), 1.0, dtype)

def run_forward(arch: ArchSpec, params: Dict[str, Tensor], x: Tensor, threads: int = 1) -> Tensor:
    """This function runs the classifier, or the feature extractor for headless
    architectures, sample by sample.

    Args:
        arch:
            The architecture.

        params:
            Dotted records in the dtype of x.

        x:
            Tensor[N, 3, H, W].

        threads:
            Worker count.

    Returns:
        Logits Tensor[N, n_classes], or c5 features without a head.
    """
    if x.ndim != 4:
        raise ShapeError(f'expected an N x C x H x W input, got {x.shape}')
    check_resolution(arch, x.shape[2:])

    def forward(index: int) -> np.ndarray:
        sample = Tensor(x.numpy()[index:index + 1])
        if arch.n_classes is None:
            return forward_features(arch, params, sample)['c5'].numpy()
        return forward_classifier(arch, params, sample).numpy()

    with ThreadPoolExecutor(max_workers=threads) as pool:
        outputs = list(pool.map(forward, range(x.shape[0])))
    return Tensor(np.concatenate(outputs, axis=0), dtype=x.dtype)

def summarize(arch: ArchSpec, x: Tensor, output: Tensor, seed: Optional[int] = None) -> InferSummary:
    """Shape, moments, per-sample argmax and a digest of the encoded output."""
    values = output.numpy().astype(np.float64)
    return InferSummary(
        arch=arch.name,
        seed=seed,
        input_shape=list(x.shape),
        output_shape=list(output.shape),
        dtype=output.dtype,
        mean=float(values.mean()),
        std=float(values.std()),
        min=float(values.min()),
        max=float(values.max()),
        top1=[int(index) for index in values.reshape(values.shape[0], -1).argmax(axis=1)],
        digest=hashlib.sha256(encode(output)).hexdigest(),
    )

def load_input(
        input_path: Optional[str] = None,
        random_shape: Optional[Sequence[int]] = None,
        seed: int = 0,
        dtype: str = 'float32'
    ) -> Tensor:
    """This function reads the input tensor or draws a random one.

    Args:
        input_path:
            .botk tensor; its dtype is kept.

        random_shape:
            Shape of a standard normal input, used when input_path is omitted.

        seed:
            Seed of the random input.

        dtype:
            Dtype of the random input.

    Returns:
        Tensor[N, C, H, W].
    """
    if input_path is not None:
        x = read_tensor(input_path)
    elif random_shape is not None:
        x = random_input(random_shape, seed, dtype)
    else:
        raise ShapeError('either an input tensor or a random shape is required')
    if x.ndim != 4:
        raise ShapeError(f'expected an N x C x H x W input, got {x.shape}')
    return x

def infer(
        arch: ArchSpec,
        x: Tensor,
        seed: int = 0,
        params_path: Optional[str] = None,
        output_path: Optional[str] = None,
        threads: int = 1
    ) -> InferSummary:
    """This function loads or draws parameters, runs the forward and optionally
    writes the output tensor.

    Args:
        arch:
            The architecture.

        x:
            Tensor[N, 3, H, W]; parameters are computed in its dtype.

        seed:
            Seed of generated parameters.

        params_path:
            .botkp bundle; parameters are drawn from the seed when omitted.

        output_path:
            Where to write the output .botk tensor.

        threads:
            Worker count.

    Returns:
        The run summary.
    """
    if x.ndim != 4:
        raise ShapeError(f'expected an N x C x H x W input, got {x.shape}')
    check_resolution(arch, x.shape[2:])

    if params_path is not None:
        params = {name: tensor.astype(x.dtype) for name, tensor in read_params(params_path).items()}
    else:
        params = init_params(arch, seed, x.dtype)

    logging.info(f'{arch.name}: forward of {x.shape} with {threads} threads')
    output = run_forward(arch, params, x, threads)
    summary = summarize(arch, x, output, None if params_path else seed)
    if output_path is not None:
        write_tensor(output_path, output)
        summary.output = output_path
    logging.info(f'{arch.name}: output {output.shape} digest {summary.digest}')
    return summary
