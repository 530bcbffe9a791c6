import pytest
from hypothesis import given

from ag_strategies import grammar_and_tree
from agdebug.grammar import parse_grammar
from agdebug.sentence import (AmbiguityError, FormatError, LexError,
                              ParseError, load_tree, parse_sentence,
                              serialize_tree, tokenize)


def test_tokenize_101(g1_buggy):
    assert tokenize(g1_buggy, ".101") == [".", "1", "0", "1"]


def test_tokenize_empty(g1_buggy):
    assert tokenize(g1_buggy, "") == []


def test_tokenize_error_offset(g1_buggy):
    with pytest.raises(LexError) as exc:
        tokenize(g1_buggy, ".2")
    assert exc.value.offset == 1


def test_tokenize_longest_match(minisem):
    assert tokenize(minisem, "let x = 1 in x end") == \
        ["let", "x", "=", "1", "in", "x", "end"]


def test_parse_101_shape(g1_buggy):
    t = parse_sentence(g1_buggy, tokenize(g1_buggy, ".101"))
    assert len(t.nodes) == 11
    assert len(t.nonterminal_nodes()) == 7
    assert [n.id for n in t.root.walk()] == list(range(11))
    productions = [n.production for n in t.root.walk() if not n.terminal]
    assert productions == ['F ::= "." L', "L ::= B L1", 'B ::= "1"',
                           "L ::= B L1", 'B ::= "0"', "L ::= B",
                           'B ::= "1"']


def test_parse_dot_alone_fails(g1_buggy):
    with pytest.raises(ParseError):
        parse_sentence(g1_buggy, ["."])


def test_parse_dot_zero(g1_buggy):
    t = parse_sentence(g1_buggy, tokenize(g1_buggy, ".0"))
    shapes = [(n.symbol, n.production) for n in t.root.walk()]
    assert shapes == [("F", 'F ::= "." L'), (".", None), ("L", "L ::= B"),
                      ("B", 'B ::= "0"'), ("0", None)]


def test_leaves_reproduce_tokens(g1_buggy, minisem):
    for g, text in ((g1_buggy, ".0110"),
                    (minisem, "let x = 1 in x + y end")):
        tokens = tokenize(g, text)
        t = parse_sentence(g, tokens)
        leaves = [n.symbol for n in t.root.walk() if n.terminal]
        assert leaves == tokens


AMBIGUOUS = """
grammar amb; start S; terminals "a";
nonterminal S { syn n: int; }
production S ::= S1 S2 { S.n = S1.n + S2.n; }
production S ::= "a" { S.n = 1; }
"""


def test_ambiguity_reports_two_derivations():
    g = parse_grammar(AMBIGUOUS)
    with pytest.raises(AmbiguityError) as exc:
        parse_sentence(g, ["a", "a", "a"])
    first, second = exc.value.derivations
    assert first != second


CYCLIC = """
grammar cyc; start S; terminals "a";
nonterminal S { syn n: int; }
production S ::= S1 { S.n = S1.n; }
production S ::= "a" { S.n = 1; }
"""


def test_unit_cycle_is_ambiguous():
    g = parse_grammar(CYCLIC)
    with pytest.raises(AmbiguityError):
        parse_sentence(g, ["a"])


def test_serialize_round_trip(g1_buggy):
    t = parse_sentence(g1_buggy, tokenize(g1_buggy, ".101"))
    s = serialize_tree(t)
    t2 = load_tree(g1_buggy, s)
    assert serialize_tree(t2) == s
    assert [(n.id, n.symbol, n.production, n.token_span)
            for n in t.root.walk()] == \
        [(n.id, n.symbol, n.production, n.token_span)
         for n in t2.root.walk()]


def test_load_tree_shape_mismatch(g1_buggy):
    t = parse_sentence(g1_buggy, tokenize(g1_buggy, ".101"))
    s = serialize_tree(t)
    broken = s.replace('("L ::= B" ("B ::= \\"1\\"" "1"))',
                       '("L ::= B" ("B ::= \\"1\\"" "1") "1")', 1)
    assert broken != s
    with pytest.raises(FormatError):
        load_tree(g1_buggy, broken)


def test_load_tree_empty(g1_buggy):
    with pytest.raises(FormatError):
        load_tree(g1_buggy, "")


def test_load_tree_unknown_production(g1_buggy):
    with pytest.raises(FormatError):
        load_tree(g1_buggy, '("L ::= Q" "1")')


def test_load_tree_wrong_root(g1_buggy):
    with pytest.raises(FormatError):
        load_tree(g1_buggy, '("B ::= \\"1\\"" "1")')


@given(grammar_and_tree())
def test_random_derivations_round_trip(gt):
    g, t = gt
    s = serialize_tree(t)
    t2 = load_tree(g, s)
    assert serialize_tree(t2) == s
    assert [n.symbol for n in t.root.walk()] == \
        [n.symbol for n in t2.root.walk()]


@given(grammar_and_tree())
def test_random_derivation_leaves_are_tokens(gt):
    g, t = gt
    leaves = [n.symbol for n in t.root.walk() if n.terminal]
    assert tuple(leaves) == t.tokens
