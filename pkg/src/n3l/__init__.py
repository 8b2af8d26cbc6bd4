"""Exact, greedy, transformer and PPO approaches to the no-three-in-line problem."""

__version__ = "0.1.0"

from .grid import (
    ContractError,
    GridConfig,
    Point,
    Symmetry,
    apply_symmetry,
    canonical_form,
    collinear,
    decode,
    encode,
    is_valid,
    violation_count,
)
from .lines import build_line_table, line_table

__all__ = [
    "ContractError", "GridConfig", "Point", "Symmetry", "apply_symmetry", "canonical_form",
    "collinear", "decode", "encode", "is_valid", "violation_count", "build_line_table",
    "line_table",
]
