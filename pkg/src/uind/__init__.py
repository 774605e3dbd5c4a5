"""Budgeted universal induction on a small prefix-free stack machine."""

__version__ = "0.1.0"

from .machine import (  # noqa: E402
    Program,
    RunResult,
    Status,
    FaultKind,
    assemble,
    canonical_order_key,
    decode_program,
    run,
)
from .enumeration import (  # noqa: E402
    EnumBudget,
    NotFound,
    algorithmic_complexity,
    algorithmic_probability,
    enumerate_programs,
    levin_search,
)
from .induction import (  # noqa: E402
    QADataset,
    find_operators,
    predict,
    sequence_predict,
    set_induction,
)

__all__ = [
    "EnumBudget", "FaultKind", "NotFound", "Program", "QADataset", "RunResult", "Status",
    "algorithmic_complexity", "algorithmic_probability", "assemble", "canonical_order_key",
    "decode_program", "enumerate_programs", "find_operators", "levin_search", "predict", "run",
    "sequence_predict", "set_induction",
]
