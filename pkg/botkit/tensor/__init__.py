"""This module brings main classes into the namespace"""
from .core import (
    DTYPES,
    REGISTRY,
    DifferentiableGraph,
    Meter,
    Tensor,
    current_graph,
    scope,
    suspended,
)
from .ops import (
    activation,
    add,
    avg_pool2d,
    batchnorm_affine,
    conv2d,
    gather_lastdim,
    global_avg_pool,
    matmul,
    max_pool2d,
    mul,
    reshape,
    scale,
    softmax_lastdim,
    total,
    transpose,
    weighted_sum,
)
from .autodiff import Gradients, GradCheckResult, check_function, grad_check, vjp
from .codec import decode, encode, read_bundle, read_tensor, write_bundle, write_tensor
from .utils import get_generator, get_key_from_str, normal, uniform
