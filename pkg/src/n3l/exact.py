"""Exact maximization of placed points subject to at most two per grid line.

Depth-first branch-and-bound over cells in row-major order with binary
include/exclude branching. Cells are Python-int bitmasks over tokens.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import combinations

from .grid import ContractError, GridConfig, Point, collinear
from .greedy import best_of
from .lines import LineTable, line_table


@dataclass
class SolveReport:
    optimum: int
    certificate: GridConfig
    proved_optimal: bool
    nodes: int
    wall_time: float

    def to_record(self) -> dict:
        return {
            "n": self.certificate.n,
            "optimum": self.optimum,
            "proved_optimal": self.proved_optimal,
            "nodes": self.nodes,
            "wall_time_s": round(self.wall_time, 6),
        }

    def format(self) -> str:
        return "\n".join(f"{k}={str(v).lower() if isinstance(v, bool) else v}"
                         for k, v in self.to_record().items()) + "\n"


class BudgetExhausted(Exception):
    pass


@dataclass
class SearchState:
    """Mutable search node. ``avail`` holds cells at or after the cursor that
    can still be placed without filling a line past two."""

    table: LineTable
    avail: int
    line_counts: list[int]
    row_occ: list[int]
    col_occ: list[int]
    points: list[int] = field(default_factory=list)
    cursor: int = 0
    node_count: int = 0

    @classmethod
    def empty(cls, table: LineTable) -> "SearchState":
        n = table.n
        return cls(table, (1 << (n * n)) - 1, [0] * len(table.lines), [0] * n, [0] * n)

    @property
    def n(self) -> int:
        return self.table.n

    def place(self, cell: int) -> int:
        """Place ``cell``; returns the previous avail mask for ``unplace``."""
        prev = self.avail
        avail = prev & ~(1 << cell)
        counts = self.line_counts
        masks = self.table.line_masks
        for li in self.table.cell_to_lines[cell]:
            counts[li] += 1
            if counts[li] == 2:
                avail &= ~masks[li]
        n = self.table.n
        self.row_occ[cell // n] += 1
        self.col_occ[cell % n] += 1
        self.points.append(cell)
        self.avail = avail
        return prev

    def unplace(self, cell: int, prev_avail: int) -> None:
        counts = self.line_counts
        for li in self.table.cell_to_lines[cell]:
            counts[li] -= 1
        n = self.table.n
        self.row_occ[cell // n] -= 1
        self.col_occ[cell % n] -= 1
        self.points.pop()
        self.avail = prev_avail

    def config(self) -> GridConfig:
        n = self.table.n
        return GridConfig(n, [Point(t // n, t % n) for t in self.points])


def _row_masks(n: int) -> list[int]:
    return [((1 << n) - 1) << (r * n) for r in range(n)]


def _col_masks(n: int) -> list[int]:
    base = sum(1 << (r * n) for r in range(n))
    return [base << c for c in range(n)]


def upper_bound(state: SearchState) -> int:
    """Current points plus, per row, the smaller of its remaining quota and its
    still-placeable cells. Never exceeds 2n."""
    n = state.n
    avail = state.avail
    total = len(state.points)
    for r, mask in enumerate(_row_masks(n)):
        room = 2 - state.row_occ[r]
        if room > 0:
            total += min(room, (avail & mask).bit_count())
    return total


def verify_certificate(config: GridConfig, table: LineTable) -> bool:
    if config.n != table.n:
        raise ContractError(f"config is {config.n}x{config.n} but table is for n={table.n}")
    return all(k <= 2 for k in table.tallies(config))


def _search(state: SearchState, best: list, max_nodes, deadline, symmetry_breaking: bool):
    n = state.n
    rows = _row_masks(n)
    cols = _col_masks(n)
    target = min(2 * n, n * n)
    half = (n - 1) // 2

    def bound() -> int:
        avail = state.avail
        rsum = 0
        for r in range(n):
            room = 2 - state.row_occ[r]
            if room > 0:
                k = (avail & rows[r]).bit_count()
                rsum += room if k > room else k
        csum = 0
        for c in range(n):
            room = 2 - state.col_occ[c]
            if room > 0:
                k = (avail & cols[c]).bit_count()
                csum += room if k > room else k
        return len(state.points) + (rsum if rsum < csum else csum)

    def dfs() -> bool:
        # returns True when the global target is reached and search can stop
        state.node_count += 1
        if max_nodes is not None and state.node_count > max_nodes:
            raise BudgetExhausted
        if deadline is not None and state.node_count & 1023 == 0 and time.perf_counter() > deadline:
            raise BudgetExhausted
        k = len(state.points)
        if k > best[0]:
            best[0] = k
            best[1] = list(state.points)
            if k >= target:
                return True
        avail = state.avail
        if not avail or bound() <= best[0]:
            return False
        cell = (avail & -avail).bit_length() - 1
        state.cursor = cell
        allowed = True
        if symmetry_breaking:
            # Mirror (r, c) -> (r, n-1-c) fixes every row, so we keep only the
            # image whose first occupied row has column sum <= n-1.
            pts = state.points
            r = cell // n
            if not pts:
                allowed = cell % n <= half
            elif len(pts) == 1 and pts[0] // n == r:
                allowed = pts[0] % n + cell % n <= n - 1
        if allowed:
            prev = state.place(cell)
            done = dfs()
            state.unplace(cell, prev)
            if done:
                return True
        state.avail = avail & ~(1 << cell)
        done = dfs()
        state.avail = avail
        return done

    return dfs()


def solve_exact(n: int, max_nodes: int | None = None, max_seconds: float | None = None,
                symmetry_breaking: bool = True, seed_incumbent: bool = True) -> SolveReport:
    if n < 1:
        raise ContractError(f"grid size must be >= 1, got {n}")
    t0 = time.perf_counter()
    table = line_table(n)
    state = SearchState.empty(table)
    best: list = [0, []]
    if seed_incumbent:
        start = best_of(n, 64, 0)
        best = [len(start), [p.row * n + p.col for p in start.points]]
    deadline = None if max_seconds is None else t0 + max_seconds
    proved = True
    try:
        _search(state, best, max_nodes, deadline, symmetry_breaking)
    except BudgetExhausted:
        proved = False
    cert = GridConfig(n, [Point(t // n, t % n) for t in best[1]])
    return SolveReport(best[0], cert, proved, state.node_count, time.perf_counter() - t0)


def brute_force_max(n: int) -> SolveReport:
    """Exhaustive subset search for n <= 4, independent of the line table."""
    if n > 4:
        raise ContractError(f"brute_force_max enumerates 2^(n^2) subsets; n={n} > 4 refused")
    if n < 1:
        raise ContractError(f"grid size must be >= 1, got {n}")
    t0 = time.perf_counter()
    cells = [Point(r, c) for r in range(n) for c in range(n)]
    best: list = [0, []]
    nodes = 0

    def rec(i: int, chosen: list[Point]):
        nonlocal nodes
        nodes += 1
        if len(chosen) > best[0]:
            best[0], best[1] = len(chosen), list(chosen)
        if i == len(cells):
            return
        p = cells[i]
        if not any(collinear(a, b, p) for a, b in combinations(chosen, 2)):
            chosen.append(p)
            rec(i + 1, chosen)
            chosen.pop()
        rec(i + 1, chosen)

    rec(0, [])
    return SolveReport(best[0], GridConfig(n, best[1]), True, nodes, time.perf_counter() - t0)
