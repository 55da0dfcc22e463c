"""This module implements the schemas of the machine-readable reports: cost tables,
cost comparisons and verification results."""
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel

COST_CONVENTION = 'botkit-madds-v1'
COMPONENTS = ('conv', 'fc', 'attn_proj', 'attn_content', 'attn_position', 'se')

class CostRow(BaseModel):
    """One stage of a cost table"""
    stage: str
    height: int = 0
    width: int = 0
    channels: int = 0
    blocks: List[str] = []
    params: int = 0
    madds: int = 0
    components: Dict[str, int] = {}

class CostTotals(BaseModel):
    """Sums over every row"""
    params: int = 0
    madds: int = 0

class Annotation(BaseModel):
    """A published figure shown next to a report, never asserted"""
    label: str
    value: float
    note: str = ''

class CostReport(BaseModel):
    """Per-stage parameter and multiply-add counts"""
    arch: str
    resolution: Tuple[int, int]
    convention: str = COST_CONVENTION
    rows: List[CostRow] = []
    totals: CostTotals = CostTotals()
    annotations: List[Annotation] = []

    def row(self, stage: str) -> Optional[CostRow]:
        """Looks a stage up by name."""
        for row in self.rows:
            if row.stage == stage:
                return row
        return None

    def component(self, name: str) -> int:
        """Sums one component over every row."""
        return sum(row.components.get(name, 0) for row in self.rows)

class CompareRow(BaseModel):
    """One stage of two reports side by side"""
    stage: str
    params_a: int = 0
    params_b: int = 0
    params_delta: int = 0
    madds_a: int = 0
    madds_b: int = 0
    madds_delta: int = 0
    madds_ratio: Optional[float] = None

class CompareReport(BaseModel):
    """Row-aligned deltas a - b"""
    arch_a: str
    arch_b: str
    resolution: Tuple[int, int]
    convention: str = COST_CONVENTION
    rows: List[CompareRow] = []
    totals: CompareRow

class VerifyRow(BaseModel):
    """One check"""
    name: str
    status: str = 'pass'
    measured: float = 0.0
    threshold: float = 0.0
    detail: str = ''

class VerifyReport(BaseModel):
    """Outcome of a verification suite"""
    suite: str
    seed: int
    rows: List[VerifyRow] = []
    passed: bool = True

class InferSummary(BaseModel):
    """Statistics of one inference run"""
    arch: str
    seed: Optional[int] = None
    input_shape: List[int]
    output_shape: List[int]
    dtype: str
    mean: float
    std: float
    min: float
    max: float
    top1: List[int] = []
    digest: str
    output: Optional[str] = None
