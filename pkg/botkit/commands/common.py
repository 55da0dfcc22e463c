#!/usr/bin/python3
"""This module implements what the commands share: resolving architecture
arguments and mapping outcomes to exit codes."""
import os
import sys
import traceback
from typing import Callable, Optional, Sequence, TextIO, Tuple, Union

from botkit.audit import logging
from botkit.backbone import (
    build_backbone,
    build_preset,
    from_document,
    load_arch,
    normalize_res,
    preset_key,
    to_document,
)
from botkit.errors import ConfigurationError
from botkit.schema import ArchSpec

EXIT_SUCCESS = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2

Outcome = Tuple[str, int]

def parse_flags(text: Optional[str]) -> Optional[Sequence[int]]:
    """Parses '0,1,1' into replacement flags."""
    if text is None:
        return None
    try:
        return [int(flag) for flag in text.split(',') if flag.strip()]
    except ValueError as error:
        raise ConfigurationError(f'malformed replacement flags {text!r}, expected e.g. 0,1,1') from error

def parse_depth(text: Union[int, str, None]) -> Union[int, str, None]:
    """'50' -> 50; named variants such as 'S1-59' stay strings."""
    if isinstance(text, str) and text.isdigit():
        return int(text)
    return text or None

def is_document(spec: Optional[str]) -> bool:
    """True when spec names an architecture JSON file rather than family-depth."""
    return spec is not None and (spec.endswith('.json') or os.path.isfile(spec))

def has_own_resolution(spec: Optional[str]) -> bool:
    """Documents and named models carry the resolution they were built for."""
    return is_document(spec) or preset_key(spec) is not None

def resolve_arch(
        spec: Optional[str] = None,
        family: Optional[str] = None,
        depth: Union[int, str, None] = None,
        replacement: Optional[str] = None,
        res: Union[int, Sequence[int], None] = None,
        **options
    ) -> ArchSpec:
    """This function turns command arguments into an architecture. A spec is either
    a JSON document path, a named model ('T3', 'T7-320', 'S5') or 'family-depth',
    split at the first dash ('botnet-50', 'botnet_s1-S1-59'); --family and --depth
    can be used instead.

    Args:
        spec:
            Path, model name or family-depth string.

        family, depth:
            Used when spec is omitted.

        replacement:
            Comma-separated c5 flags.

        res:
            Input resolution; overrides the one stored in a JSON document or
            given by a named model.

        options:
            Further build_backbone keywords such as width_divisor.

    Returns:
        The architecture.
    """
    if is_document(spec):
        arch = load_arch(spec)
        if res is not None and normalize_res(res) != tuple(arch.input_res):
            arch = from_document(to_document(arch).copy(update={'input_res': normalize_res(res)}))
        return arch

    options = {name: value for name, value in options.items() if value is not None}
    if preset_key(spec) is not None:
        return build_preset(spec, res, parse_flags(replacement), **options)

    if spec is not None:
        family, _, depth = spec.partition('-')
    if not family:
        raise ConfigurationError('an architecture is required: a JSON path, model name, family-depth or --family')
    return build_backbone(
        family, parse_depth(depth) or 50, parse_flags(replacement), 224 if res is None else res, **options
    )

def execute(command: Callable[[], Outcome], name: str, stdout: TextIO = None, stderr: TextIO = None) -> int:
    """This function runs a command and prints its output only once it has
    finished, so a failing command leaves nothing on stdout and a single message on
    stderr.

    Args:
        command:
            Returns (text for stdout, exit code).

        name:
            Command name for the log.

        stdout, stderr:
            Streams; default to the process streams.

    Returns:
        0 on success, 2 for invalid input, 1 for anything else.
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    logging.info(f'{name}: start')
    try:
        with logging.timed(name):
            text, code = command()
    except ValueError as error:
        logging.error(f'{name}: {error}')
        print(f'error: {error}', file=stderr)
        return EXIT_INVALID
    except Exception as error: # pylint: disable=broad-except
        logging.error(traceback.format_exc())
        print(f'error: {error}', file=stderr)
        return EXIT_FAILURE
    stdout.write(text if text.endswith('\n') else text + '\n')
    logging.info(f'{name}: finished with exit code {code}')
    return code
