#!/usr/bin/python3
"""This module implements the verify command."""
from typing import Optional, Sequence, Union

from botkit.controller import Settings, verify
from .common import EXIT_FAILURE, EXIT_SUCCESS, Outcome

def cmd_verify(
        suite: str = 'all',
        seed: int = 0,
        settings: Optional[Settings] = None,
        depths: Optional[Sequence[Union[int, str]]] = None
    ) -> Outcome:
    """Runs a suite and prints its report as JSON; exits 0 only when every row
    passes."""
    report = verify(suite, seed, settings, depths)
    return report.json(indent=2), EXIT_SUCCESS if report.passed else EXIT_FAILURE
