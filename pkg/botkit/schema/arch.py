"""This module implements the schemas describing attention layers, blocks and whole
backbones, and the JSON document an architecture serializes to."""
from typing import List, Optional, Tuple

from pydantic import BaseModel, Extra, root_validator, validator

GROUP_NAMES = ('c2', 'c3', 'c4', 'c5')
POS_MODES = ('relative', 'absolute', 'none')
BLOCK_KINDS = ('conv_bottleneck', 'bot', 'nl_insert')
FAMILIES = ('resnet', 'botnet', 'botnet_s1', 'senet')

class MHSAConfig(BaseModel):
    """Attention layer geometry and position-encoding mode"""
    d_model: int
    heads: int = 4
    fm_h: int
    fm_w: int
    pos_mode: str = 'relative'
    content_logits: bool = True

    class Config:
        """Frozen, strict"""
        extra = Extra.forbid
        allow_mutation = False

    @validator('pos_mode')
    def pos_mode_known(cls, value): # pylint: disable=no-self-argument
        """relative, absolute or none"""
        if value not in POS_MODES:
            raise ValueError(f'unknown pos_mode {value}')
        return value

    @root_validator(skip_on_failure=True)
    def geometry(cls, values): # pylint: disable=no-self-argument
        """Heads split d_model evenly and the featuremap is not empty."""
        if values['heads'] < 1 or values['d_model'] % values['heads']:
            raise ValueError(f"d_model {values['d_model']} is not divisible by {values['heads']} heads")
        if values['fm_h'] < 1 or values['fm_w'] < 1:
            raise ValueError('featuremap extents must be >= 1')
        if not values['content_logits'] and values['pos_mode'] == 'none':
            raise ValueError('attention without content logits needs position encodings')
        return values

    @property
    def d_head(self) -> int:
        """Channels per head."""
        return self.d_model // self.heads

    @property
    def logit_scale(self) -> float:
        """d_head ** -0.5, applied to the queries."""
        return self.d_head ** -0.5

    @property
    def positions(self) -> int:
        """n = fm_h * fm_w."""
        return self.fm_h * self.fm_w

class BlockSpec(BaseModel):
    """One residual block"""
    kind: str = 'conv_bottleneck'
    in_channels: int
    mid_channels: int
    out_channels: int
    stride: int = 1
    attention: Optional[MHSAConfig] = None
    se: Optional[int] = None
    activation: str = 'relu'
    value_projection: bool = False

    class Config:
        """Frozen, strict"""
        extra = Extra.forbid
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def structure(cls, values): # pylint: disable=no-self-argument
        """Bottleneck widths, strides and the attention/SE placement rules."""
        kind = values['kind']
        if kind not in BLOCK_KINDS:
            raise ValueError(f'unknown block kind {kind}')
        if values['stride'] not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {values['stride']}")
        if values['activation'] not in ('relu', 'silu'):
            raise ValueError(f"unknown activation {values['activation']}")
        if min(values['in_channels'], values['mid_channels'], values['out_channels']) < 1:
            raise ValueError('channel counts must be >= 1')

        if kind == 'nl_insert':
            if values['in_channels'] != values['out_channels'] or values['stride'] != 1:
                raise ValueError('a non-local block keeps channels and resolution')
            if values['in_channels'] % 2 or values['mid_channels'] * 2 != values['in_channels']:
                raise ValueError('a non-local block reduces an even channel count by 2')
            if values['attention'] is not None or values['se'] is not None:
                raise ValueError('a non-local block has no MHSA config and no SE gate')
            return values

        if values['out_channels'] != 4 * values['mid_channels']:
            raise ValueError('bottleneck out_channels must be 4 * mid_channels')
        if kind == 'bot':
            attention = values['attention']
            if attention is None:
                raise ValueError('a BoT block needs an attention config')
            if attention.d_model != values['mid_channels']:
                raise ValueError('attention d_model must equal mid_channels')
            if values['se'] is not None:
                raise ValueError('SE gates attach to convolutional bottlenecks only')
        elif values['attention'] is not None:
            raise ValueError('only BoT blocks carry an attention config')
        if values['se'] is not None and values['se'] < 1:
            raise ValueError('SE ratio must be >= 1')
        return values

    @property
    def has_projection(self) -> bool:
        """True when the shortcut needs a strided 1x1 projection."""
        return self.kind != 'nl_insert' and (self.stride != 1 or self.in_channels != self.out_channels)

class NLInsertion(BaseModel):
    """An additional block inserted into a blockgroup"""
    group: str
    position: Optional[int] = None
    kind: str = 'nl'

    class Config:
        """Strict"""
        extra = Extra.forbid

    @validator('group')
    def group_known(cls, value): # pylint: disable=no-self-argument
        """c2 to c5"""
        if value not in GROUP_NAMES:
            raise ValueError(f'unknown blockgroup {value}')
        return value

    @validator('kind')
    def kind_known(cls, value): # pylint: disable=no-self-argument
        """nl or bot"""
        if value not in ('nl', 'bot'):
            raise ValueError(f'unknown insertion kind {value}')
        return value

class ReplacementConfig(BaseModel):
    """Which c5 blocks become BoT blocks, and which blocks are inserted"""
    flags: List[bool] = []
    nl_insertions: List[NLInsertion] = []

    class Config:
        """Strict"""
        extra = Extra.forbid

class ArchSpec(BaseModel):
    """A fully elaborated backbone"""
    name: str
    family: str
    depths: List[int]
    stem_channels: int = 64
    blockgroups: List[List[BlockSpec]]
    replacement: ReplacementConfig = ReplacementConfig()
    input_res: Tuple[int, int]
    n_classes: Optional[int] = 1000
    activation: str = 'relu'
    heads: int = 4
    pos_mode: str = 'relative'
    content_logits: bool = True
    se_ratio: Optional[int] = None
    se_groups: List[str] = []
    width_divisor: int = 1
    value_projection: bool = False

    class Config:
        """Frozen, strict"""
        extra = Extra.forbid
        allow_mutation = False

    @validator('blockgroups')
    def four_groups(cls, value): # pylint: disable=no-self-argument
        """c2..c5"""
        if len(value) != len(GROUP_NAMES):
            raise ValueError(f'expected {len(GROUP_NAMES)} blockgroups, got {len(value)}')
        return value

    def groups(self) -> List[Tuple[str, List[BlockSpec]]]:
        """Blockgroups paired with their names."""
        return list(zip(GROUP_NAMES, self.blockgroups))

    def structure(self) -> dict:
        """Everything but the name and family, for structural comparison."""
        return self.dict(exclude={'name', 'family', 'replacement'})

class ArchDocument(BaseModel):
    """The JSON form of an architecture"""
    name: str
    family: str
    blockgroups: List[int]
    replacement_flags: List[int]
    input_res: Tuple[int, int]
    n_classes: Optional[int] = 1000
    activation: str = 'relu'
    se_ratio: Optional[int] = None
    heads: int = 4
    pos_mode: str = 'relative'
    content_logits: bool = True
    se_groups: List[str] = []
    width_divisor: int = 1
    value_projection: bool = False
    nl_insertions: List[NLInsertion] = []

    class Config:
        """Unknown fields are rejected"""
        extra = Extra.forbid

    @validator('family')
    def family_known(cls, value): # pylint: disable=no-self-argument
        """One of the four families"""
        if value not in FAMILIES:
            raise ValueError(f'unknown family {value}')
        return value

    @validator('input_res', pre=True)
    def square_res(cls, value): # pylint: disable=no-self-argument
        """A single integer means a square input."""
        if isinstance(value, int):
            return (value, value)
        return value

    @validator('replacement_flags', each_item=True)
    def binary_flags(cls, value): # pylint: disable=no-self-argument
        """0 or 1"""
        if value not in (0, 1):
            raise ValueError(f'replacement flags are 0 or 1, got {value}')
        return value
