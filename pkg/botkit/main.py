#!/usr/bin/python3
"""This module configures logging and dispatches the command line."""
import os

# One BLAS thread per worker; BOTKIT_THREADS is the only parallelism.
for _variable in ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS'):
    os.environ.setdefault(_variable, '1')

# pylint: disable=wrong-import-position
import argparse
import logging
import sys
from logging.handlers import TimedRotatingFileHandler
from typing import List, Optional

from botkit.audit import LOGGER
from botkit.commands import EXIT_INVALID, cmd_compare, cmd_describe, cmd_infer, cmd_verify, execute
from botkit.commands.common import parse_depth
from botkit.controller import SUITES, Settings, get_settings
from botkit.errors import BotkitError

def init_logging(settings: Settings):
    """Initialize the application log"""
    os.makedirs(settings.log_dir, exist_ok=True)

    app_log_handler = TimedRotatingFileHandler(
        os.path.join(settings.log_dir, 'application.log'),
        when="D",
        backupCount=30
    )

    LOGGER.addHandler(app_log_handler)
    LOGGER.setLevel(getattr(logging, settings.log_level.upper(), logging.INFO))

def add_arch_options(parser: argparse.ArgumentParser):
    """Options shared by every command that builds an architecture."""
    parser.add_argument('--width-divisor', type=int, default=None, help='divide every channel width')
    parser.add_argument('--pos-mode', choices=['relative', 'absolute', 'none'], default=None)
    parser.add_argument('--heads', type=int, default=None)
    parser.add_argument('--n-classes', type=int, default=None)

def build_parser() -> argparse.ArgumentParser:
    """This function declares the command line.

    Returns:
        The parser.
    """
    parser = argparse.ArgumentParser(prog='botkit', description='Bottleneck transformer backbones on numpy')
    parser.add_argument('--config', default=None, help='TOML settings file')
    commands = parser.add_subparsers(dest='command', required=True)

    describe = commands.add_parser('describe', help='stage table of one architecture')
    describe.add_argument(
        'spec', nargs='?', default=None, help='family-depth, model name such as T3, or architecture JSON path'
    )
    describe.add_argument('--family', default=None)
    describe.add_argument('--depth', default=None)
    describe.add_argument('--replacement', default=None, help='c5 flags, e.g. 0,1,1')
    describe.add_argument('--res', type=int, default=None)
    describe.add_argument('--json', dest='json_path', default=None, help='write the architecture document')
    describe.add_argument('--format', dest='output_format', choices=['text', 'json'], default='text')
    add_arch_options(describe)

    compare = commands.add_parser('compare', help='stage-aligned cost deltas a - b')
    compare.add_argument('spec_a', help='family-depth, model name or architecture JSON path')
    compare.add_argument('spec_b', help='family-depth, model name or architecture JSON path')
    compare.add_argument('--res', type=int, default=None)
    compare.add_argument('--format', dest='output_format', choices=['text', 'json'], default='text')
    add_arch_options(compare)

    verify = commands.add_parser('verify', help='run a verification suite')
    verify.add_argument('--suite', choices=list(SUITES) + ['all'], default='all')
    verify.add_argument('--seed', type=int, default=0)
    verify.add_argument(
        '--depths', default=None, help='comma-separated depth matrix of the replacement invariant; empty for none'
    )

    infer = commands.add_parser('infer', help='forward inference on a .botk tensor')
    infer.add_argument('spec', help='family-depth, model name or architecture JSON path')
    infer.add_argument('--seed', type=int, default=0)
    infer.add_argument('--params', dest='params_path', default=None, help='.botkp parameter bundle')
    source = infer.add_mutually_exclusive_group(required=True)
    source.add_argument('--input', dest='input_path', default=None, help='.botk input tensor')
    source.add_argument('--random', dest='random_shape', default=None, help='random input shape NxCxHxW')
    infer.add_argument('--output', dest='output_path', default='output.botk')
    infer.add_argument('--res', type=int, default=None)
    add_arch_options(infer)
    return parser

def _arch_options(args: argparse.Namespace) -> dict:
    return {
        'width_divisor': args.width_divisor,
        'pos_mode': args.pos_mode,
        'heads': args.heads,
        'n_classes': args.n_classes,
    }

def main(argv: Optional[List[str]] = None) -> int:
    """This function parses arguments, loads settings and runs one command.

    Args:
        argv:
            Arguments without the program name; defaults to sys.argv.

    Returns:
        Exit code.
    """
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings(args.config)
    except BotkitError as error:
        print(f'error: {error}', file=sys.stderr)
        return EXIT_INVALID
    init_logging(settings)

    if args.command == 'describe':
        def command():
            return cmd_describe(
                args.spec, args.family, args.depth, args.replacement, args.res,
                args.json_path, args.output_format, **_arch_options(args)
            )
    elif args.command == 'compare':
        def command():
            return cmd_compare(args.spec_a, args.spec_b, args.res, args.output_format, **_arch_options(args))
    elif args.command == 'verify':
        depths = None
        if args.depths is not None:
            depths = [parse_depth(depth.strip()) for depth in args.depths.split(',') if depth.strip()]

        def command():
            return cmd_verify(args.suite, args.seed, settings, depths)
    else:
        def command():
            return cmd_infer(
                args.spec, args.seed, args.params_path, args.input_path, args.random_shape,
                args.output_path, args.res, settings, **_arch_options(args)
            )

    return execute(command, args.command)

def start():
    """Entry point of start.py."""
    raise SystemExit(main())
