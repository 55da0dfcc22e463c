#!/usr/bin/python3
"""This module implements reverse-mode differentiation over a recorded graph and
the central-finite-difference gradient check."""
from collections.abc import Mapping
from typing import Callable, Dict, Iterator, Optional, Tuple

import numpy as np

from botkit.audit import logging
from botkit.errors import ConfigurationError, GradCheckError
from .core import REGISTRY, DifferentiableGraph, Tensor
from .ops import weighted_sum

class Gradients(Mapping):
    """This class maps recorded tensors to their gradients. Tensors the output
    does not depend on get zero gradients."""
    def __init__(self, grads: Dict[Tensor, np.ndarray]):
        self._grads = grads

    def __getitem__(self, tensor: Tensor) -> Tensor:
        grad = self._grads.get(tensor)
        if grad is None:
            return Tensor(np.zeros(tensor.shape), dtype=tensor.dtype)
        return Tensor(grad, dtype=tensor.dtype)

    def __contains__(self, tensor) -> bool:
        return tensor in self._grads

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self._grads)

    def __len__(self) -> int:
        return len(self._grads)

def vjp(
        graph: DifferentiableGraph,
        output_cotangent: Tensor,
        output: Optional[Tensor] = None
    ) -> Gradients:
    """This function propagates a cotangent from a recorded output back to every
    tensor the output depends on.

    Args:
        graph:
            The recorded forward.

        output_cotangent:
            Tensor shaped like the output.

        output:
            Recorded tensor to differentiate; defaults to the graph output.

    Returns:
        Gradients for all inputs and parameters.
    """
    output = output if output is not None else graph.output
    if output is None:
        raise ConfigurationError('vjp: the graph recorded no ops')
    if output_cotangent.shape != output.shape:
        raise ConfigurationError(
            f'vjp: cotangent {output_cotangent.shape} does not match output {output.shape}'
        )

    grads: Dict[Tensor, np.ndarray] = {output: np.array(output_cotangent.data, dtype=output.data.dtype)}
    for node in reversed(graph.nodes):
        grad = grads.get(node.output)
        if grad is None:
            continue
        input_grads = REGISTRY[node.op].vjp(grad, node)
        for tensor, input_grad in zip(node.inputs, input_grads):
            if input_grad is None:
                continue
            input_grad = np.asarray(input_grad, dtype=tensor.data.dtype).reshape(tensor.shape)
            if tensor in grads:
                grads[tensor] = grads[tensor] + input_grad
            else:
                grads[tensor] = input_grad

    return Gradients(grads)

class GradCheckResult:
    """This class holds the outcome of a gradient check."""
    def __init__(self, errors: Dict[str, float], coordinates: int):
        self.errors = errors
        self.coordinates = coordinates

    @property
    def max_rel_error(self) -> float:
        """Worst relative error over every checked coordinate."""
        return max(self.errors.values(), default=0.0)

    def passed(self, threshold: float = 1e-6) -> bool:
        """True when every coordinate is within `threshold`."""
        return self.max_rel_error < threshold

def grad_check(
        graph: DifferentiableGraph,
        wrt: Mapping[str, Tensor],
        h: float = 1e-5,
        output: Optional[Tensor] = None
    ) -> GradCheckResult:
    """This function compares analytic gradients of a recorded scalar forward with
    central finite differences, coordinate by coordinate:
    |analytic - (f(t + h) - f(t - h)) / 2h| / max(1, |analytic|).

    Args:
        graph:
            Recorded float64 forward whose output has a single element.

        wrt:
            Named tensors of the graph to perturb.

        h:
            Step in [1e-6, 1e-4].

        output:
            Recorded scalar; defaults to the graph output.

    Returns:
        The worst relative error per named tensor.
    """
    output = output if output is not None else graph.output
    if not 1e-6 <= h <= 1e-4:
        raise ConfigurationError(f'grad_check: step {h} outside [1e-6, 1e-4]')
    if output is None or output.size != 1:
        raise ConfigurationError('grad_check: the forward must be scalar valued')
    if output.dtype != 'float64' or any(tensor.dtype != 'float64' for tensor in wrt.values()):
        raise ConfigurationError('grad_check: float64 is required')
    if not np.isfinite(output.data).all():
        raise GradCheckError(f'grad_check: non-finite forward value {output.item()}')

    grads = vjp(graph, Tensor(np.ones(output.shape)), output)

    errors: Dict[str, float] = {}
    coordinates = 0
    for name, tensor in wrt.items():
        analytic = grads[tensor].data
        base = tensor.data
        worst = 0.0
        for index in np.ndindex(*tensor.shape):
            plus = _evaluate(graph, output, tensor, base, index, h)
            minus = _evaluate(graph, output, tensor, base, index, -h)
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise GradCheckError(
                    f'grad_check: non-finite forward when perturbing {name}{list(index)}'
                )
            numeric = (plus - minus) / (2.0 * h)
            error = abs(analytic[index] - numeric) / max(1.0, abs(analytic[index]))
            worst = max(worst, float(error))
            coordinates += 1
        errors[name] = worst
        logging.debug(f'{name}: max relative error {worst:.3e}')

    return GradCheckResult(errors, coordinates)

def _evaluate(
        graph: DifferentiableGraph,
        output: Tensor,
        tensor: Tensor,
        base: np.ndarray,
        index: Tuple[int, ...],
        step: float
    ) -> float:
    perturbed = base.copy()
    perturbed[index] += step
    return graph.replay({tensor: Tensor(perturbed)}, output).item()

def check_function(
        forward: Callable[..., Tensor],
        inputs: Mapping[str, Tensor],
        seed: int = 0,
        h: float = 1e-5
    ) -> GradCheckResult:
    """This function records `forward(**inputs)`, reduces it to a scalar with fixed
    random weights and runs `grad_check` against every input.

    Args:
        forward:
            Function of named tensors returning a tensor.

        inputs:
            Named float64 tensors, all of them checked.

        seed:
            Seed of the reduction weights.

        h:
            Finite-difference step.

    Returns:
        The gradient check result.
    """
    with DifferentiableGraph() as graph:
        result = forward(**inputs)
        weights = Tensor(np.random.default_rng(seed).standard_normal(result.shape))
        loss = weighted_sum(result, weights)
    return grad_check(graph, inputs, h=h, output=loss)
