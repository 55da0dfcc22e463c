#!/usr/bin/python3
"""This module implements the infer command."""
from typing import Optional, Sequence, Union

from botkit.controller import Settings, infer, load_input, parse_shape
from .common import EXIT_SUCCESS, Outcome, has_own_resolution, resolve_arch

def cmd_infer(
        spec: str,
        seed: int = 0,
        params_path: Optional[str] = None,
        input_path: Optional[str] = None,
        random_shape: Optional[str] = None,
        output_path: Optional[str] = 'output.botk',
        res: Union[int, Sequence[int], None] = None,
        settings: Optional[Settings] = None,
        **options
    ) -> Outcome:
    """This function runs the forward of an architecture on a .botk input or a
    seeded random one.

    Args:
        spec:
            Architecture argument, see resolve_arch. A family-depth spec is built
            for the input's resolution unless `res` says otherwise.

        seed:
            Seed of generated parameters and of the random input.

        params_path:
            Optional .botkp bundle.

        input_path:
            Optional .botk input.

        random_shape:
            'NxCxHxW' of a random input.

        output_path:
            Output .botk path.

        res:
            Resolution the architecture is built for.

        settings:
            Thread count and compute dtype.

    Returns:
        Summary JSON and exit code.
    """
    settings = settings or Settings()
    shape = parse_shape(random_shape) if random_shape is not None else None
    x = load_input(input_path, shape, seed, settings.dtype)
    if res is None and not has_own_resolution(spec):
        res = x.shape[2:]
    arch = resolve_arch(spec, res=res, **options)
    summary = infer(arch, x, seed, params_path, output_path, settings.threads)
    return summary.json(indent=2), EXIT_SUCCESS
