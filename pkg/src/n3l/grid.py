"""Grid geometry: points, configurations, collinearity, D4 symmetry and tokens."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, NamedTuple

import numpy as np


class ContractError(ValueError):
    """Raised when a caller violates an operation's precondition."""


class DecodeError(ValueError):
    def __init__(self, index: int, token: int, n: int):
        super().__init__(f"token {token} at index {index} is outside [0, {n * n})")
        self.index = index
        self.token = token


class Point(NamedTuple):
    row: int
    col: int


class GridConfig:
    """A set of placed points on an n x n grid, kept in insertion order.

    Equality compares the grid size and the point *set*; placement order is
    available through ``points`` but does not participate in ``==``.
    """

    __slots__ = ("n", "_points", "_occupied")

    def __init__(self, n: int, points: Iterable[tuple[int, int]] = ()):
        if n < 1:
            raise ContractError(f"grid size must be >= 1, got {n}")
        self.n = n
        self._points: list[Point] = []
        self._occupied: set[Point] = set()
        for p in points:
            self.add(p)

    def add(self, p: tuple[int, int]) -> None:
        p = Point(int(p[0]), int(p[1]))
        if not (0 <= p.row < self.n and 0 <= p.col < self.n):
            raise ContractError(f"point {tuple(p)} outside {self.n}x{self.n} grid")
        if p in self._occupied:
            raise ContractError(f"duplicate point {tuple(p)}")
        self._points.append(p)
        self._occupied.add(p)

    @property
    def points(self) -> tuple[Point, ...]:
        return tuple(self._points)

    def occupancy(self) -> np.ndarray:
        mask = np.zeros((self.n, self.n), dtype=bool)
        for r, c in self._points:
            mask[r, c] = True
        return mask

    def copy(self) -> "GridConfig":
        return GridConfig(self.n, self._points)

    def with_point(self, p: tuple[int, int]) -> "GridConfig":
        out = self.copy()
        out.add(p)
        return out

    def __contains__(self, p) -> bool:
        return Point(*p) in self._occupied

    def __len__(self) -> int:
        return len(self._points)

    def __iter__(self):
        return iter(self._points)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridConfig):
            return NotImplemented
        return self.n == other.n and self._occupied == other._occupied

    def __hash__(self):
        return hash((self.n, frozenset(self._occupied)))

    def __repr__(self) -> str:
        pts = ", ".join(f"({r},{c})" for r, c in self._points)
        return f"GridConfig(n={self.n}, [{pts}])"


def collinear(p1, p2, p3) -> bool:
    if p1 == p2 or p1 == p3 or p2 == p3:
        raise ContractError(f"collinear() needs distinct points, got {p1}, {p2}, {p3}")
    return (p2[0] - p1[0]) * (p3[1] - p1[1]) == (p3[0] - p1[0]) * (p2[1] - p1[1])


def collinear_triples(config: GridConfig) -> list[tuple[Point, Point, Point]]:
    return [t for t in combinations(config.points, 3) if collinear(*t)]


def violation_count(config: GridConfig) -> int:
    return len(collinear_triples(config))


def is_valid(config: GridConfig) -> bool:
    pts = config.points
    # row/column tallies catch the common failures before the cubic scan
    rows: dict[int, int] = {}
    cols: dict[int, int] = {}
    for r, c in pts:
        rows[r] = rows.get(r, 0) + 1
        cols[c] = cols.get(c, 0) + 1
        if rows[r] > 2 or cols[c] > 2:
            return False
    return not any(collinear(*t) for t in combinations(pts, 3))


def creates_violation(config: GridConfig, p) -> int:
    """Number of collinear triples that placing ``p`` would add."""
    pts = config.points
    return sum(1 for a, b in combinations(pts, 2) if collinear(a, b, p))


# -- tokens ------------------------------------------------------------------

def token_of(p, n: int) -> int:
    return p[0] * n + p[1]


def point_of(token: int, n: int) -> Point:
    return Point(token // n, token % n)


def encode(config: GridConfig) -> list[int]:
    n = config.n
    return [r * n + c for r, c in config.points]


def decode(tokens: Iterable[int], n: int) -> GridConfig:
    """Tokens to a config; repeated tokens are dropped, first occurrence wins."""
    out = GridConfig(n)
    for i, t in enumerate(tokens):
        t = int(t)
        if not 0 <= t < n * n:
            raise DecodeError(i, t, n)
        p = point_of(t, n)
        if p not in out:
            out.add(p)
    return out


# -- symmetry ----------------------------------------------------------------

@dataclass(frozen=True)
class Symmetry:
    """Element of D4: optional mirror (r, c) -> (r, n-1-c), then ``rotation``
    quarter turns of (r, c) -> (c, n-1-r)."""

    rotation: int = 0
    reflected: bool = False

    def __post_init__(self):
        if self.rotation not in (0, 1, 2, 3):
            raise ContractError(f"rotation must be 0..3 quarter turns, got {self.rotation}")

    def map_point(self, p, n: int) -> Point:
        r, c = p
        if self.reflected:
            c = n - 1 - c
        for _ in range(self.rotation):
            r, c = c, n - 1 - r
        return Point(r, c)

    def inverse(self) -> "Symmetry":
        if self.reflected:
            return self
        return Symmetry((4 - self.rotation) % 4, False)

    def compose(self, other: "Symmetry") -> "Symmetry":
        """``self`` after ``other``."""
        # rot^a . ref^x . rot^b . ref^y ; ref . rot^b = rot^-b . ref
        if self.reflected:
            rot = (self.rotation - other.rotation) % 4
        else:
            rot = (self.rotation + other.rotation) % 4
        return Symmetry(rot, self.reflected != other.reflected)


SYMMETRIES: tuple[Symmetry, ...] = tuple(
    Symmetry(rot, ref) for ref in (False, True) for rot in range(4)
)
IDENTITY = SYMMETRIES[0]


def apply_symmetry(config: GridConfig, s: Symmetry) -> GridConfig:
    n = config.n
    return GridConfig(n, [s.map_point(p, n) for p in config.points])


def symmetry_images(config: GridConfig) -> list[GridConfig]:
    return [apply_symmetry(config, s) for s in SYMMETRIES]


def canonical_form(config: GridConfig) -> tuple[int, ...]:
    n = config.n
    best = None
    for s in SYMMETRIES:
        toks = tuple(sorted(token_of(s.map_point(p, n), n) for p in config.points))
        if best is None or toks < best:
            best = toks
    return best


# -- text format -------------------------------------------------------------

def format_config(config: GridConfig, comment: str | None = None) -> str:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"n={config.n}")
    lines.extend(f"{r} {c}" for r, c in config.points)
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> GridConfig:
    n = None
    points = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if n is None:
            if not line.startswith("n="):
                raise ValueError(f"line {lineno}: expected 'n=<int>' header, got {raw!r}")
            try:
                n = int(line[2:])
            except ValueError:
                raise ValueError(f"line {lineno}: bad grid size {line[2:]!r}") from None
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'row col', got {raw!r}")
        try:
            points.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer coordinates {raw!r}") from None
    if n is None:
        raise ValueError("missing 'n=<int>' header")
    try:
        return GridConfig(n, points)
    except ContractError as e:
        raise ValueError(str(e)) from None


def read_config(path) -> GridConfig:
    with open(path) as f:
        return parse_config(f.read())


def write_config(config: GridConfig, path, comment: str | None = None) -> None:
    with open(path, "w") as f:
        f.write(format_config(config, comment))
