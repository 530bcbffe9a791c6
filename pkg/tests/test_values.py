from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from agdebug.values import (UNDEFINED, diff_values, render_value,
                            values_equal)


def test_render_rationals():
    assert render_value(Fraction(3, 8)) == "3/8"
    assert render_value(Fraction(5, 1)) == "5"
    assert render_value(Fraction(-1, 2)) == "-1/2"


def test_render_structures():
    assert render_value((1, Fraction(1, 2))) == "[1, 1/2]"
    assert render_value({"b": 2, "a": True}) == "{a: true, b: 2}"
    assert render_value('say "hi"') == '"say \\"hi\\""'
    assert render_value(UNDEFINED) == "undefined"


def test_equality_is_sort_aware():
    assert not values_equal(True, 1)
    assert not values_equal(1, Fraction(1))
    assert values_equal(Fraction(2, 4), Fraction(1, 2))
    assert values_equal({"x": (1, 2)}, {"x": (1, 2)})
    assert not values_equal({"x": 1}, {"x": True})


def test_diff_map_addition():
    report = diff_values({"x": 1}, {"x": 1, "y": 2})
    assert [(e.path, e.kind) for e in report.edits] == [(".y", "added")]


def test_diff_scalars():
    report = diff_values(Fraction(3, 8), Fraction(5, 8))
    assert [(e.path, e.kind, e.a, e.b) for e in report.edits] == \
        [("", "changed", "3/8", "5/8")]


def test_diff_identity_empty():
    v = {"tbl": {"x": True}, "n": (1, 2, 3)}
    assert diff_values(v, v).empty


def test_diff_nested():
    a = {"env": {"x": 1, "y": 2}, "xs": (1, 2)}
    b = {"env": {"x": 1}, "xs": (1, 2, 3)}
    report = diff_values(a, b)
    assert {(e.path, e.kind) for e in report.edits} == {
        (".env.y", "removed"), (".xs[2]", "added")}


scalar = st.one_of(st.integers(), st.booleans(),
                   st.fractions(), st.text(max_size=5))
value = st.recursive(
    scalar,
    lambda children: st.one_of(
        st.lists(children, max_size=3).map(tuple),
        st.dictionaries(st.text(max_size=3), children, max_size=3)),
    max_leaves=8)


@given(value)
def test_diff_empty_iff_equal(v):
    assert diff_values(v, v).empty


@given(value, value)
def test_diff_agrees_with_equality(a, b):
    assert diff_values(a, b).empty == values_equal(a, b)
