"""This module brings the schema models into the namespace"""
from .arch import (
    BLOCK_KINDS,
    FAMILIES,
    GROUP_NAMES,
    POS_MODES,
    ArchDocument,
    ArchSpec,
    BlockSpec,
    MHSAConfig,
    NLInsertion,
    ReplacementConfig,
)
from .report import (
    COMPONENTS,
    COST_CONVENTION,
    Annotation,
    CompareReport,
    CompareRow,
    CostReport,
    CostRow,
    CostTotals,
    InferSummary,
    VerifyReport,
    VerifyRow,
)
