"""Enumeration of grid lines holding three or more cells.

Each stored line becomes one "at most two points" constraint for the solver
and the greedy saturator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gcd
from typing import NamedTuple

import numpy as np

from .grid import ContractError, GridConfig, Point


class LineKey(NamedTuple):
    """Coefficients of a*row + b*col + c = 0, gcd-reduced, a > 0 or (a == 0 and b > 0)."""

    a: int
    b: int
    c: int


def line_through(p1, p2) -> LineKey:
    x1, y1 = p1
    x2, y2 = p2
    if (x1, y1) == (x2, y2):
        raise ContractError(f"line_through needs two distinct points, got {p1} twice")
    a = y1 - y2
    b = x2 - x1
    c = x1 * y2 - x2 * y1
    g = gcd(gcd(abs(a), abs(b)), abs(c))
    a, b, c = a // g, b // g, c // g
    if a < 0 or (a == 0 and b < 0):
        a, b, c = -a, -b, -c
    return LineKey(a, b, c)


@dataclass(frozen=True)
class LineConstraint:
    key: LineKey
    cells: tuple[Point, ...]


@dataclass
class LineTable:
    n: int
    lines: list[LineConstraint]
    # indexed by token r*n + c
    cell_to_lines: list[list[int]] = field(repr=False)

    def lines_hit(self, p) -> list[int]:
        return self.cell_to_lines[p[0] * self.n + p[1]]

    @cached_property
    def line_masks(self) -> list[int]:
        """Each line as a bitmask over tokens."""
        n = self.n
        masks = []
        for line in self.lines:
            m = 0
            for r, c in line.cells:
                m |= 1 << (r * n + c)
            masks.append(m)
        return masks

    @cached_property
    def incidence(self) -> np.ndarray:
        """Dense (n*n, num_lines) 0/1 float32 matrix."""
        inc = np.zeros((self.n * self.n, len(self.lines)), dtype=np.float32)
        for i, line in enumerate(self.lines):
            for r, c in line.cells:
                inc[r * self.n + c, i] = 1.0
        return inc

    def tallies(self, config: GridConfig) -> list[int]:
        counts = [0] * len(self.lines)
        for p in config.points:
            for i in self.lines_hit(p):
                counts[i] += 1
        return counts

    def violations(self, config: GridConfig) -> int:
        """Collinear triples counted per line as sum of C(k, 3)."""
        return sum(k * (k - 1) * (k - 2) // 6 for k in self.tallies(config))

    def dump(self) -> str:
        out = []
        for line in self.lines:
            cells = " ".join(f"({r},{c})" for r, c in line.cells)
            out.append(f"{line.key.a} {line.key.b} {line.key.c} : {cells}")
        return "\n".join(out) + ("\n" if out else "")


def build_line_table(n: int) -> LineTable:
    if n < 1:
        raise ContractError(f"grid size must be >= 1, got {n}")
    cells = [Point(r, c) for r in range(n) for c in range(n)]
    members: dict[LineKey, set[Point]] = {}
    for i, p in enumerate(cells):
        for q in cells[i + 1:]:
            members.setdefault(line_through(p, q), set()).update((p, q))
    lines = [
        LineConstraint(key, tuple(sorted(pts)))
        for key, pts in sorted(members.items())
        if len(pts) >= 3
    ]
    cell_to_lines: list[list[int]] = [[] for _ in range(n * n)]
    for idx, line in enumerate(lines):
        for r, c in line.cells:
            cell_to_lines[r * n + c].append(idx)
    return LineTable(n, lines, cell_to_lines)


_TABLES: dict[int, LineTable] = {}


def line_table(n: int) -> LineTable:
    """Memoized ``build_line_table``; tables are never mutated after build."""
    table = _TABLES.get(n)
    if table is None:
        table = _TABLES[n] = build_line_table(n)
    return table


def lines_hit(table: LineTable, p) -> list[int]:
    return table.lines_hit(p)
