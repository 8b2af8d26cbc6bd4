import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import configs
from n3l.grid import (
    IDENTITY, SYMMETRIES, ContractError, DecodeError, GridConfig, Point, Symmetry,
    apply_symmetry, canonical_form, collinear, collinear_triples, decode, encode,
    format_config, is_valid, parse_config, point_of, symmetry_images, token_of,
    violation_count,
)


@pytest.mark.parametrize("pts,expected", [
    (((0, 0), (1, 1), (2, 2)), True),
    (((0, 0), (1, 2), (2, 3)), False),
    (((0, 0), (2, 1), (4, 2)), True),
])
def test_collinear_examples(pts, expected):
    assert collinear(*pts) is expected


def test_collinear_rejects_repeated_points():
    with pytest.raises(ContractError):
        collinear((1, 1), (1, 1), (2, 2))


points = st.tuples(st.integers(-50, 50), st.integers(-50, 50))


@given(st.lists(points, min_size=3, max_size=3, unique=True))
def test_collinear_permutation_invariant(pts):
    want = collinear(*pts)
    assert all(collinear(*q) == want for q in itertools.permutations(pts))


@given(st.lists(points, min_size=3, max_size=3, unique=True))
def test_collinear_matches_float_area(pts):
    (a, b), (c, d), (e, f) = pts
    area = a * (d - f) + c * (f - b) + e * (b - d)
    assert collinear(*pts) == (area == 0)


def test_is_valid_examples(tmp_path):
    assert is_valid(GridConfig(5))
    assert not is_valid(GridConfig(5, [(0, 0), (1, 1), (2, 2)]))
    five = GridConfig(5, [(0, 2), (0, 3), (1, 0), (1, 2), (2, 0), (2, 4), (3, 1), (3, 3), (4, 1), (4, 4)])
    assert is_valid(five) and len(five) == 10


def test_violation_count_examples():
    assert violation_count(GridConfig(5, [(0, 0), (1, 1), (2, 2)])) == 1
    assert violation_count(GridConfig(5, [(0, 0), (0, 1), (0, 2), (0, 3)])) == 4


@given(configs(max_n=6, max_points=10))
def test_violation_count_zero_iff_valid(config):
    assert (violation_count(config) == 0) == is_valid(config)


@given(configs(max_n=6, max_points=10), st.sampled_from(SYMMETRIES))
def test_violations_invariant_under_symmetry(config, s):
    assert violation_count(apply_symmetry(config, s)) == violation_count(config)


def test_config_rejects_bad_points():
    with pytest.raises(ContractError):
        GridConfig(3, [(0, 3)])
    with pytest.raises(ContractError):
        GridConfig(3, [(1, 1), (1, 1)])
    with pytest.raises(ContractError):
        GridConfig(0)


def test_token_examples():
    assert token_of((1, 2), 5) == 7
    assert point_of(99, 10) == Point(9, 9)
    assert decode([4, 4, 1], 3).points == (Point(1, 1), Point(0, 1))


def test_decode_out_of_range():
    with pytest.raises(DecodeError) as e:
        decode([0, 9], 3)
    assert e.value.index == 1 and e.value.token == 9


@given(configs())
def test_encode_decode_roundtrip(config):
    back = decode(encode(config), config.n)
    assert back.points == config.points


def test_symmetry_examples():
    c = GridConfig(3, [(0, 1), (2, 2)])
    assert apply_symmetry(c, IDENTITY) == c
    assert Symmetry(1).map_point((0, 1), 3) == (1, 2)


@given(configs(max_points=8), st.sampled_from(SYMMETRIES))
def test_symmetry_inverse(config, s):
    assert apply_symmetry(apply_symmetry(config, s), s.inverse()) == config


@given(configs(max_n=5, max_points=6), st.sampled_from(SYMMETRIES), st.sampled_from(SYMMETRIES))
def test_symmetry_compose(config, a, b):
    assert apply_symmetry(apply_symmetry(config, b), a) == apply_symmetry(config, a.compose(b))


def test_symmetry_group_closed_and_distinct():
    n = 5
    probe = GridConfig(n, [(0, 1), (0, 3), (2, 4)])
    images = {canonical_form(apply_symmetry(probe, s)) for s in SYMMETRIES}
    assert len(images) == 1
    assert len({tuple(sorted(encode(apply_symmetry(probe, s)))) for s in SYMMETRIES}) == 8
    for a, b in itertools.product(SYMMETRIES, repeat=2):
        assert a.compose(b) in SYMMETRIES


def test_canonical_examples():
    c = GridConfig(4, [(0, 1), (2, 3), (3, 3)])
    assert canonical_form(c) == canonical_form(apply_symmetry(c, Symmetry(1)))
    assert canonical_form(GridConfig(3, [(0, 1)])) == (1,)
    orbit = {encode(img)[0] for img in symmetry_images(GridConfig(3, [(0, 1)]))}
    assert orbit == {1, 3, 5, 7}
    assert canonical_form(GridConfig(3, [(0, 0), (0, 2), (2, 0), (2, 2)])) == (0, 2, 6, 8)


@given(configs(max_n=6, max_points=8), st.sampled_from(SYMMETRIES))
def test_canonical_form_is_orbit_invariant(config, s):
    assert canonical_form(apply_symmetry(config, s)) == canonical_form(config)


@given(configs(max_n=6, max_points=8))
def test_text_format_roundtrip(config):
    assert parse_config(format_config(config, comment="x\ny")).points == config.points


@pytest.mark.parametrize("text", ["", "3 4\n", "n=x\n", "n=3\n1\n", "n=3\n1 a\n", "n=3\n5 5\n"])
def test_parse_errors(text):
    with pytest.raises(ValueError):
        parse_config(text)


def test_parse_error_names_line():
    with pytest.raises(ValueError, match="line 3"):
        parse_config("n=3\n0 0\n0 0 0\n")


def test_collinear_triples_lists_each_once():
    row = GridConfig(4, [(1, 0), (1, 1), (1, 2), (1, 3)])
    assert len(collinear_triples(row)) == 4
