"""This module brings main classes into the namespace"""
from .common import (
    EXIT_FAILURE,
    EXIT_INVALID,
    EXIT_SUCCESS,
    execute,
    has_own_resolution,
    is_document,
    resolve_arch,
)
from .describe import cmd_describe
from .compare import cmd_compare
from .verify import cmd_verify
from .infer import cmd_infer
