import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import configs
from n3l.grid import ContractError, GridConfig, violation_count
from n3l.lines import LineKey, build_line_table, line_table, line_through, lines_hit
from oracles import grid_triples, maximal_lines, table_triples


def test_line_key_examples():
    assert line_through((0, 0), (1, 1)) == LineKey(1, -1, 0)
    assert line_through((0, 0), (0, 3)) == LineKey(1, 0, 0)
    assert line_through((0, 0), (2, 4)) == line_through((1, 2), (2, 4))


def test_line_key_rejects_same_point():
    with pytest.raises(ContractError):
        line_through((2, 2), (2, 2))


pts = st.tuples(st.integers(-20, 20), st.integers(-20, 20))


@given(pts, pts)
def test_line_key_is_symmetric_and_contains_both(p, q):
    if p == q:
        return
    key = line_through(p, q)
    assert key == line_through(q, p)
    for x, y in (p, q):
        assert key.a * x + key.b * y + key.c == 0
    assert key.a > 0 or (key.a == 0 and key.b > 0)


@pytest.mark.parametrize("n,count", [(1, 0), (2, 0), (3, 8), (4, 14)])
def test_line_counts(n, count):
    assert len(build_line_table(n).lines) == count


@pytest.mark.parametrize("n", range(2, 9))
def test_table_matches_triple_enumeration(n):
    table = build_line_table(n)
    assert table_triples(table) == grid_triples(n)


@pytest.mark.parametrize("n", range(2, 7))
def test_lines_are_maximal(n):
    table = build_line_table(n)
    got = {frozenset(tuple(p) for p in line.cells) for line in table.lines}
    assert got == maximal_lines(n)


def test_lines_hit_examples():
    t3 = line_table(3)
    assert len(lines_hit(t3, (1, 1))) == 4
    assert len(lines_hit(t3, (0, 0))) == 3
    t2 = line_table(2)
    assert all(lines_hit(t2, (r, c)) == [] for r in range(2) for c in range(2))


def test_table_is_deterministic():
    assert build_line_table(6).dump() == build_line_table(6).dump()


def test_masks_and_incidence_agree():
    table = line_table(5)
    for i, mask in enumerate(table.line_masks):
        col = table.incidence[:, i]
        assert {t for t in range(25) if mask >> t & 1} == set(col.nonzero()[0].tolist())


@given(configs(min_n=2, max_n=7, max_points=12))
def test_table_violations_match_triples(config):
    assert line_table(config.n).violations(config) == violation_count(config)


def test_tallies():
    table = line_table(4)
    c = GridConfig(4, [(0, 0), (0, 1), (0, 2)])
    tallies = table.tallies(c)
    row0 = [i for i, line in enumerate(table.lines) if all(p.row == 0 for p in line.cells)]
    assert tallies[row0[0]] == 3
