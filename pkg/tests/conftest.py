import hypothesis
import pytest

from agdebug.cli import asset_path
from agdebug.evaluator import evaluate
from agdebug.grammar import parse_grammar
from agdebug.sentence import parse_sentence, tokenize

hypothesis.settings.register_profile(
    "ci", max_examples=60, deadline=None, derandomize=True)
hypothesis.settings.load_profile("ci")


def load_asset(name: str) -> str:
    with open(asset_path(name)) as f:
        return f.read()


@pytest.fixture(scope="session")
def g1_buggy():
    return parse_grammar(load_asset("g1_buggy.ag"))


@pytest.fixture(scope="session")
def g1_fixed():
    return parse_grammar(load_asset("g1_fixed.ag"))


@pytest.fixture(scope="session")
def minisem():
    return parse_grammar(load_asset("minisem_fixed.ag"))


@pytest.fixture(scope="session")
def trace_101(g1_buggy):
    tree = parse_sentence(g1_buggy, tokenize(g1_buggy, ".101"))
    return evaluate(g1_buggy, tree)


@pytest.fixture(scope="session")
def trace_101_fixed(g1_fixed):
    tree = parse_sentence(g1_fixed, tokenize(g1_fixed, ".101"))
    return evaluate(g1_fixed, tree)
