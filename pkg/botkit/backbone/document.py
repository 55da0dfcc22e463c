#!/usr/bin/python3
"""This module implements the JSON form of architectures."""
import json

from pydantic import ValidationError

from botkit.errors import ConfigurationError, SerializationError
from botkit.schema import ArchDocument, ArchSpec, ReplacementConfig
from .builder import build_backbone

def to_document(arch: ArchSpec) -> ArchDocument:
    """This function reduces an architecture to the fields it is built from.

    Args:
        arch:
            The architecture.

    Returns:
        Its document.
    """
    return ArchDocument(
        name=arch.name,
        family=arch.family,
        blockgroups=arch.depths,
        replacement_flags=[int(flag) for flag in arch.replacement.flags],
        input_res=arch.input_res,
        n_classes=arch.n_classes,
        activation=arch.activation,
        se_ratio=arch.se_ratio,
        heads=arch.heads,
        pos_mode=arch.pos_mode,
        content_logits=arch.content_logits,
        se_groups=arch.se_groups,
        width_divisor=arch.width_divisor,
        value_projection=arch.value_projection,
        nl_insertions=arch.replacement.nl_insertions,
    )

def from_document(document: ArchDocument) -> ArchSpec:
    """This function rebuilds the architecture a document describes.

    Args:
        document:
            A validated document.

    Returns:
        The architecture.
    """
    return build_backbone(
        document.family,
        None,
        replacement=ReplacementConfig(
            flags=[bool(flag) for flag in document.replacement_flags],
            nl_insertions=document.nl_insertions,
        ),
        input_res=document.input_res,
        n_classes=document.n_classes,
        activation=document.activation,
        heads=document.heads,
        pos_mode=document.pos_mode,
        content_logits=document.content_logits,
        se_ratio=document.se_ratio,
        se_groups=document.se_groups,
        width_divisor=document.width_divisor,
        blockgroups=document.blockgroups,
        value_projection=document.value_projection,
        name=document.name,
    )

def dumps_arch(arch: ArchSpec) -> str:
    """Serializes an architecture to its JSON document."""
    return to_document(arch).json(indent=2)

def loads_arch(text: str) -> ArchSpec:
    """This function parses a JSON document and builds its architecture. Unknown
    fields are rejected.

    Args:
        text:
            JSON text.

    Returns:
        The architecture.
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as error:
        raise SerializationError(f'malformed architecture JSON: {error}') from error
    try:
        document = ArchDocument.parse_obj(payload)
    except ValidationError as error:
        raise ConfigurationError(f'invalid architecture document: {error}') from error
    return from_document(document)

def load_arch(path: str) -> ArchSpec:
    """Reads an architecture JSON file."""
    try:
        with open(path, encoding='utf-8') as file:
            return loads_arch(file.read())
    except OSError as error:
        raise SerializationError(f'failed to read {path}: {error}') from error

def dump_arch(path: str, arch: ArchSpec):
    """Writes an architecture JSON file."""
    with open(path, 'w', encoding='utf-8') as file:
        file.write(dumps_arch(arch))
