#!/usr/bin/python3
"""This module holds published cost figures for the named backbones. They are
shown next to reports for orientation and are never compared against."""
from typing import Dict, List, Sequence, Tuple

from botkit.schema import Annotation, ArchSpec

# (name, resolution side) -> (label, value, note)
PUBLISHED: Dict[Tuple[str, int], List[Tuple[str, float, str]]] = {
    ('ResNet-50', 224): [
        ('params', 25.5e6, 'ImageNet classifier'),
        ('madds', 3.86e9, 'ImageNet classifier'),
    ],
    ('BoTNet-50', 224): [
        ('params', 20.8e6, 'ImageNet classifier'),
        ('madds', 3.79e9, 'ImageNet classifier'),
    ],
    ('BoTNet-S1-50', 224): [
        ('params', 20.8e6, 'ImageNet classifier'),
        ('madds', 4.27e9, 'ImageNet classifier; stride-1 c5 accounting not reproduced'),
    ],
    ('ResNet-50', 1024): [
        ('params', 25.5e6, 'backbone'),
        ('madds', 85.4e9, 'backbone'),
    ],
    ('BoTNet-50', 1024): [
        ('params', 20.8e6, 'backbone'),
        ('madds', 102.98e9, 'backbone'),
        ('madds', 121e9, 'detector including FPN and heads'),
    ],
    ('ResNet-101', 1024): [
        ('madds', 162.99e9, 'detector including FPN and heads'),
    ],
    ('ResNet-152', 1024): [
        ('madds', 240.56e9, 'detector including FPN and heads'),
    ],
}

def annotations(arch: ArchSpec, resolution: Sequence[int]) -> List[Annotation]:
    """Published figures for a full-width named backbone at a square resolution."""
    height, width = resolution
    if arch.width_divisor != 1 or height != width:
        return []
    return [
        Annotation(label=label, value=value, note=note)
        for label, value, note in PUBLISHED.get((arch.name, height), [])
    ]
