#!/usr/bin/python3
"""This module implements the dense tensor, the op registry and the recording
machinery used for reverse-mode differentiation and cost metering.

Tensors are immutable: the wrapped numpy array is flagged read-only and every op
allocates a fresh output. Recording and metering state is thread-local, so
concurrent forwards on different threads never see each other's graphs."""
import threading
from contextlib import contextmanager
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from botkit.errors import ParameterError, ShapeError, UnsupportedOpError

DTYPES = {
    'float32': np.dtype(np.float32),
    'float64': np.dtype(np.float64),
}

_STATE = threading.local()

class Tensor:
    """This class wraps a read-only, row-major numpy array of float32 or float64."""
    __slots__ = ('data',)

    def __init__(self, data: Any, dtype: Optional[str] = None):
        """This method copies `data` into a new immutable tensor.

        Args:
            data:
                Anything numpy can turn into an array.

            dtype:
                'float32' or 'float64'. Defaults to the dtype of `data` when it is one
                of those, float64 otherwise.
        """
        if dtype is not None and dtype not in DTYPES:
            raise ParameterError(f'unsupported dtype {dtype}')

        if isinstance(data, Tensor):
            data = data.data
        array = np.array(data, copy=True)
        if dtype is None:
            dtype = array.dtype.name if array.dtype.name in DTYPES else 'float64'

        self.data = _freeze(np.array(array, dtype=DTYPES[dtype], order='C'))

    @classmethod
    def adopt(cls, array: np.ndarray) -> 'Tensor':
        """This method wraps an array produced by a kernel without copying it
        unless it is not contiguous.

        Args:
            array:
                Freshly allocated float array nobody else holds a reference to.

        Returns:
            A tensor owning the array.
        """
        tensor = cls.__new__(cls)
        if not array.flags.c_contiguous:
            array = np.ascontiguousarray(array)
        tensor.data = _freeze(array)
        return tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        """Extents, outermost first."""
        return self.data.shape

    @property
    def dtype(self) -> str:
        """'float32' or 'float64'."""
        return self.data.dtype.name

    @property
    def ndim(self) -> int:
        """Rank."""
        return self.data.ndim

    @property
    def size(self) -> int:
        """Number of elements."""
        return self.data.size

    def numpy(self) -> np.ndarray:
        """Returns the read-only backing array."""
        return self.data

    def item(self) -> float:
        """Returns the single value of a one-element tensor."""
        if self.data.size != 1:
            raise ShapeError(f'item: tensor of shape {self.shape} has {self.data.size} elements')
        return float(self.data.reshape(-1)[0])

    def astype(self, dtype: str) -> 'Tensor':
        """Returns a new leaf tensor converted to `dtype`."""
        return Tensor(self.data, dtype=dtype)

    def __repr__(self):
        return f'Tensor(shape={self.shape}, dtype={self.dtype})'

def _freeze(array: np.ndarray) -> np.ndarray:
    if array.dtype.name not in DTYPES:
        raise ParameterError(f'unsupported dtype {array.dtype.name}')
    if any(extent < 1 for extent in array.shape):
        raise ShapeError(f'all extents must be >= 1, got {array.shape}')
    array.setflags(write=False)
    return array

class Node:
    """One executed op: its name, input tensors, output tensor and static attributes."""
    __slots__ = ('op', 'inputs', 'output', 'attrs')

    def __init__(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor, attrs: Dict[str, Any]):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.attrs = attrs

class DifferentiableGraph:
    """This class records every op executed while it is the active graph, in
    execution order. The record holds references to all inputs, so it is enough
    to evaluate vector-Jacobian products in reverse or to replay the forward with
    some leaves replaced."""
    def __init__(self):
        self.nodes: List[Node] = []

    def __enter__(self) -> 'DifferentiableGraph':
        _graph_stack().append(self)
        return self

    def __exit__(self, *exc_info):
        _graph_stack().pop()

    def record(self, node: Node):
        """Appends an executed op."""
        self.nodes.append(node)

    @property
    def output(self) -> Optional[Tensor]:
        """The output of the last recorded op."""
        return self.nodes[-1].output if self.nodes else None

    def replay(
            self,
            overrides: Optional[Dict[Tensor, Tensor]] = None,
            output: Optional[Tensor] = None
        ) -> Tensor:
        """This method re-executes the recorded ops in order, substituting the
        tensors named in `overrides`. Nothing is recorded while replaying.

        Args:
            overrides:
                Map from recorded tensor to the tensor to use in its place.

            output:
                Recorded tensor whose replayed value is returned; defaults to the
                graph output.

        Returns:
            The replayed value of `output`.
        """
        values: Dict[Tensor, Tensor] = dict(overrides or {})
        with suspended():
            for node in self.nodes:
                inputs = [values.get(tensor, tensor) for tensor in node.inputs]
                values[node.output] = REGISTRY[node.op](*inputs, **node.attrs)
        target = output if output is not None else self.output
        return values.get(target, target)

class Meter:
    """This class accumulates multiply-adds, produced elements and call counts per
    op name and per scope while it is active."""
    def __init__(self):
        self.madds: Dict[str, int] = {}
        self.elements: Dict[str, int] = {}
        self.calls: Dict[str, int] = {}
        self.scoped_madds: Dict[str, int] = {}

    def __enter__(self) -> 'Meter':
        _meter_stack().append(self)
        return self

    def __exit__(self, *exc_info):
        _meter_stack().pop()

    def observe(self, op: str, madds: int, output: Tensor):
        """Books one op invocation."""
        self.madds[op] = self.madds.get(op, 0) + madds
        self.elements[op] = self.elements.get(op, 0) + output.size
        self.calls[op] = self.calls.get(op, 0) + 1
        for name in _scope_stack()[:1] or ['']:
            self.scoped_madds[name] = self.scoped_madds.get(name, 0) + madds

    @property
    def total_madds(self) -> int:
        """Sum over all ops."""
        return sum(self.madds.values())

class Operation:
    """This class binds an op name to its numpy kernel, its multiply-add count and
    its vector-Jacobian product rule."""
    def __init__(self, name: str, kernel: Callable, madds: Optional[Callable] = None):
        self.name = name
        self.kernel = kernel
        self.count_madds = madds
        self.rule: Optional[Callable] = None

    def defvjp(self, rule: Callable) -> Callable:
        """Registers the VJP rule. The rule receives the output cotangent, the input
        arrays, `out=` the output array and the op attributes, and returns one
        gradient array (or None) per input."""
        self.rule = rule
        return rule

    def __call__(self, *inputs: Tensor, **attrs: Any) -> Tensor:
        dtypes = {tensor.dtype for tensor in inputs}
        if len(dtypes) > 1:
            raise ParameterError(f'{self.name}: mixed operand dtypes {sorted(dtypes)}')

        dtype = inputs[0].data.dtype
        result = self.kernel(*(tensor.data for tensor in inputs), **attrs)
        output = Tensor.adopt(np.asarray(result, dtype=dtype))

        meters = _meter_stack()
        if meters:
            madds = 0
            if self.count_madds is not None:
                madds = int(self.count_madds(*(tensor.shape for tensor in inputs), **attrs))
            for meter in meters:
                meter.observe(self.name, madds, output)

        graph = current_graph()
        if graph is not None:
            graph.record(Node(self.name, tuple(inputs), output, attrs))

        return output

    def vjp(self, grad: np.ndarray, node: Node) -> Sequence[Optional[np.ndarray]]:
        """Evaluates the registered rule for a recorded node."""
        if self.rule is None:
            raise UnsupportedOpError(f'op {self.name} has no registered VJP')
        return self.rule(
            grad,
            *(tensor.data for tensor in node.inputs),
            out=node.output.data,
            **node.attrs
        )

REGISTRY: Dict[str, Operation] = {}

def operation(name: str, madds: Optional[Callable] = None) -> Callable[[Callable], Operation]:
    """This function is a decorator registering a numpy kernel as an op.

    Args:
        name:
            Stable op name used in graphs and meters.

        madds:
            Optional function of the input shapes and attributes returning the
            multiply-accumulate count of one invocation.

    Returns:
        A decorator returning the registered `Operation`.
    """
    def register(kernel: Callable) -> Operation:
        op = Operation(name, kernel, madds)
        REGISTRY[name] = op
        return op
    return register

def _graph_stack() -> List[Optional[DifferentiableGraph]]:
    if not hasattr(_STATE, 'graphs'):
        _STATE.graphs = []
    return _STATE.graphs

def _meter_stack() -> List[Meter]:
    if not hasattr(_STATE, 'meters'):
        _STATE.meters = []
    return _STATE.meters

def _scope_stack() -> List[str]:
    if not hasattr(_STATE, 'scopes'):
        _STATE.scopes = []
    return _STATE.scopes

def current_graph() -> Optional[DifferentiableGraph]:
    """Returns the innermost active graph on this thread, if any."""
    stack = _graph_stack()
    return stack[-1] if stack else None

@contextmanager
def suspended() -> Iterator[None]:
    """Pauses recording on this thread."""
    stack = _graph_stack()
    stack.append(None)
    try:
        yield
    finally:
        stack.pop()

@contextmanager
def scope(name: str) -> Iterator[None]:
    """Attributes metered multiply-adds to `name`. Only the outermost scope is
    used as the booking key."""
    stack = _scope_stack()
    stack.append(name)
    try:
        yield
    finally:
        stack.pop()
