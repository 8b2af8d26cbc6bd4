"""Fixed-capacity min-heap of the best configurations, deduplicated by
symmetry-canonical form, with JSON-lines persistence."""

from __future__ import annotations

import enum
import heapq
import itertools
import json
from dataclasses import dataclass
from typing import IO, Iterable

from .grid import ContractError, DecodeError, GridConfig, canonical_form, decode, encode, is_valid


class InsertResult(enum.Enum):
    ACCEPTED = "accepted"
    REJECTED_DUPLICATE = "rejected_duplicate"
    REJECTED_LOW_SCORE = "rejected_low_score"


class PoolLoadError(ValueError):
    def __init__(self, lineno: int, message: str, source: str | None = None):
        where = f"{source}:{lineno}" if source else f"line {lineno}"
        super().__init__(f"{where}: {message}")
        self.lineno = lineno
        self.source = source


@dataclass(frozen=True)
class PoolEntry:
    score: int
    tokens: tuple[int, ...]
    n: int

    def config(self) -> GridConfig:
        return decode(self.tokens, self.n)

    def to_record(self) -> dict:
        return {"n": self.n, "score": self.score, "tokens": list(self.tokens)}


def config_record(config: GridConfig) -> dict:
    return {"n": config.n, "score": len(config), "tokens": encode(config)}


def dumps_record(record: dict) -> str:
    return json.dumps(record, separators=(", ", ": "))


class TopPool:
    def __init__(self, capacity: int, n: int | None = None):
        if capacity < 1:
            raise ContractError(f"pool capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.n = n
        # (score, arrival, canonical tokens); arrival breaks score ties so the
        # oldest minimum is evicted first
        self._heap: list[tuple[int, int, tuple[int, ...]]] = []
        self._seen: set[tuple[int, ...]] = set()
        self._arrival = itertools.count()

    def __len__(self) -> int:
        return len(self._heap)

    @property
    def min_score(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    @property
    def best_score(self) -> int | None:
        return max(s for s, _, _ in self._heap) if self._heap else None

    def insert(self, config: GridConfig) -> InsertResult:
        if self.n is None:
            self.n = config.n
        elif config.n != self.n:
            raise ContractError(f"pool holds n={self.n} configs, got n={config.n}")
        if not is_valid(config):
            raise ContractError("only valid configs can enter the pool")
        form = canonical_form(config)
        if form in self._seen:
            return InsertResult.REJECTED_DUPLICATE
        score = len(form)
        if len(self._heap) >= self.capacity:
            if score <= self._heap[0][0]:
                return InsertResult.REJECTED_LOW_SCORE
            _, _, evicted = heapq.heapreplace(self._heap, (score, next(self._arrival), form))
            self._seen.discard(evicted)
        else:
            heapq.heappush(self._heap, (score, next(self._arrival), form))
        self._seen.add(form)
        return InsertResult.ACCEPTED

    def insert_many(self, configs: Iterable[GridConfig]) -> dict[InsertResult, int]:
        tally = {r: 0 for r in InsertResult}
        for c in configs:
            tally[self.insert(c)] += 1
        return tally

    def snapshot(self) -> list[PoolEntry]:
        ordered = sorted(self._heap, key=lambda e: (-e[0], e[1]))
        return [PoolEntry(s, form, self.n) for s, _, form in ordered]

    def configs(self) -> list[GridConfig]:
        return [e.config() for e in self.snapshot()]

    def check(self) -> None:
        """Assert internal consistency between heap and seen set."""
        assert len(self._heap) <= self.capacity
        assert {f for _, _, f in self._heap} == self._seen
        assert len(self._seen) == len(self._heap)
        for i in range(1, len(self._heap)):
            assert self._heap[(i - 1) // 2] <= self._heap[i]

    def write(self, fh: IO[str]) -> None:
        for entry in self.snapshot():
            fh.write(dumps_record(entry.to_record()) + "\n")

    def save(self, path) -> None:
        with open(path, "w") as f:
            self.write(f)


def parse_record(line: str, lineno: int, source: str | None = None) -> GridConfig:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise PoolLoadError(lineno, f"invalid JSON ({e.msg})", source) from None
    if not isinstance(rec, dict) or not {"n", "score", "tokens"} <= rec.keys():
        raise PoolLoadError(lineno, "record needs keys n, score, tokens", source)
    n, score, tokens = rec["n"], rec["score"], rec["tokens"]
    if not isinstance(n, int) or n < 1 or not isinstance(tokens, list) \
            or not all(isinstance(t, int) for t in tokens):
        raise PoolLoadError(lineno, "n must be a positive int and tokens a list of ints", source)
    try:
        config = decode(tokens, n)
    except DecodeError as e:
        raise PoolLoadError(lineno, str(e), source) from None
    if len(config) != len(tokens):
        raise PoolLoadError(lineno, "repeated tokens", source)
    if score != len(config):
        raise PoolLoadError(lineno, f"score {score} != point count {len(config)}", source)
    if not is_valid(config):
        raise PoolLoadError(lineno, "config has three collinear points", source)
    return config


def read_records(lines: Iterable[str], source: str | None = None) -> list[GridConfig]:
    out = []
    for lineno, line in enumerate(lines, 1):
        if line.strip():
            out.append(parse_record(line, lineno, source))
    return out


def load(records: Iterable[str], capacity: int, source: str | None = None) -> TopPool:
    pool = TopPool(capacity)
    for config in read_records(records, source):
        pool.insert(config)
    return pool


def load_file(path, capacity: int) -> TopPool:
    with open(path) as f:
        return load(f, capacity, source=str(path))


def write_configs(configs: Iterable[GridConfig], fh: IO[str]) -> None:
    for c in configs:
        fh.write(dumps_record(config_record(c)) + "\n")
