"""Greedy saturation with one-step lookahead.

Each step places the available cell that leaves the most cells available
afterwards, breaking ties with a seeded generator, until nothing is placeable.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import ContractError, GridConfig, Point, is_valid
from .lines import LineTable, line_table


@dataclass
class AvailabilityMask:
    n: int
    available: np.ndarray  # (n, n) bool
    count: int


def make_rng(seed: int) -> np.random.Generator:
    # Philox is counter based, so per-config seeds give independent streams.
    return np.random.Generator(np.random.Philox(seed))


def _line_counts(config: GridConfig, table: LineTable) -> np.ndarray:
    counts = np.zeros(len(table.lines), dtype=np.int64)
    for p in config.points:
        counts[table.lines_hit(p)] += 1
    return counts


def _available_flat(config: GridConfig, table: LineTable, counts: np.ndarray) -> np.ndarray:
    n = table.n
    avail = np.ones(n * n, dtype=bool)
    for r, c in config.points:
        avail[r * n + c] = False
    full = counts >= 2
    if full.any():
        avail &= ~(table.incidence[:, full].sum(axis=1) > 0)
    return avail


def availability(config: GridConfig, table: LineTable) -> AvailabilityMask:
    if config.n != table.n:
        raise ContractError(f"config is {config.n}x{config.n} but table is for n={table.n}")
    if not is_valid(config):
        raise ContractError("availability() needs a valid config")
    counts = _line_counts(config, table)
    avail = _available_flat(config, table, counts)
    return AvailabilityMask(table.n, avail.reshape(table.n, table.n), int(avail.sum()))


def placement_scores(avail: np.ndarray, counts: np.ndarray, inc: np.ndarray,
                     cand: np.ndarray) -> np.ndarray:
    """Available-cell count after placing each candidate (candidate excluded)."""
    k = len(cand)
    hit = np.zeros((k, avail.size), dtype=bool)
    closing = counts == 1
    if closing.any():
        s = inc[:, closing]
        # two distinct cells share at most one line, so a positive dot product
        # means the cell sits on a line the candidate would fill
        hit = (s[cand] @ s.T) > 0
    hit[np.arange(k), cand] = True
    return int(avail.sum()) - (hit & avail).sum(axis=1)


def greedy_saturate(start: GridConfig, table: LineTable, rng_seed: int) -> GridConfig:
    if start.n != table.n:
        raise ContractError(f"config is {start.n}x{start.n} but table is for n={table.n}")
    if not is_valid(start):
        raise ContractError("greedy_saturate() needs a valid start config")
    n = table.n
    inc = table.incidence
    rng = make_rng(rng_seed)
    out = start.copy()
    counts = _line_counts(start, table)
    avail = _available_flat(start, table, counts)
    while True:
        cand = np.flatnonzero(avail)
        if cand.size == 0:
            return out
        scores = placement_scores(avail, counts, inc, cand)
        best = cand[scores == scores.max()]
        cell = int(best[rng.integers(best.size)]) if best.size > 1 else int(best[0])
        out.add(Point(cell // n, cell % n))
        avail[cell] = False
        hit = table.cell_to_lines[cell]
        counts[hit] += 1
        for li in hit:
            if counts[li] == 2:
                avail[inc[:, li] > 0] = False


def generate_pool(n: int, count: int, base_seed: int, workers: int = 1) -> list[GridConfig]:
    if count < 1:
        raise ContractError(f"count must be >= 1, got {count}")
    table = line_table(n)
    empty = GridConfig(n)
    seeds = [base_seed + i for i in range(count)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(lambda s: greedy_saturate(empty, table, s), seeds))
    return [greedy_saturate(empty, table, s) for s in seeds]


def best_of(n: int, count: int, base_seed: int = 0) -> GridConfig:
    pool = generate_pool(n, count, base_seed)
    return max(pool, key=len)
