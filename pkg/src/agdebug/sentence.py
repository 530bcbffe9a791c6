"""Tokenizing input sentences and building parse trees.

Parsing is chart-based (Earley), so any context-free skeleton works and
ambiguity is detected rather than silently resolved: the debugger's trace
semantics require a single attributed tree.
"""

from __future__ import annotations

from dataclasses import dataclass

from .grammar import Grammar, Production


class LexError(Exception):
    def __init__(self, offset: int, text: str):
        super().__init__(f"no terminal matches input at offset {offset}: "
                         f"{text[offset:offset + 10]!r}")
        self.offset = offset


class ParseError(Exception):
    def __init__(self, position: int, expected: frozenset[str]):
        exp = ", ".join(sorted(expected)) or "end of input"
        super().__init__(f"parse failed at token {position}; expected one of: {exp}")
        self.position = position
        self.expected = expected


class AmbiguityError(Exception):
    def __init__(self, first: str, second: str):
        super().__init__("input is ambiguous; two derivations:\n"
                         f"  {first}\n  {second}")
        self.derivations = (first, second)


class FormatError(Exception):
    """A serialized tree is malformed or does not fit the grammar."""


@dataclass(frozen=True)
class ParseNode:
    id: int  # stable preorder index
    symbol: str
    production: str | None  # production id; None for terminal leaves
    children: tuple["ParseNode", ...]
    token_span: tuple[int, int]  # [start, end) over the token stream

    @property
    def terminal(self) -> bool:
        return self.production is None

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass(frozen=True)
class ParseTree:
    root: ParseNode
    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_by_id",
                           {n.id: n for n in self.root.walk()})

    def node(self, node_id: int) -> ParseNode:
        return self._by_id[node_id]

    @property
    def nodes(self) -> tuple[ParseNode, ...]:
        return tuple(self._by_id.values())

    def nonterminal_nodes(self) -> tuple[ParseNode, ...]:
        return tuple(n for n in self.nodes if not n.terminal)


def tokenize(g: Grammar, text: str) -> list[str]:
    """Longest-match split of `text` into the grammar's terminal literals;
    whitespace between tokens is skipped."""
    terminals = sorted(g.terminals, key=len, reverse=True)
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        for t in terminals:
            if text.startswith(t, i):
                tokens.append(t)
                i += len(t)
                break
        else:
            raise LexError(i, text)
    return tokens


# ---------------------------------------------------------------------------
# Earley parsing


@dataclass(frozen=True)
class _Item:
    prod: int  # index into grammar.productions
    dot: int
    origin: int


def _nullable(g: Grammar) -> frozenset[str]:
    nullable: set[str] = set()
    changed = True
    while changed:
        changed = False
        for i, p in enumerate(g.productions):
            if p.lhs in nullable:
                continue
            if all((not s.terminal) and s.text in nullable for s in p.rhs):
                nullable.add(p.lhs)
                changed = True
    return frozenset(nullable)


def parse_sentence(g: Grammar, tokens: list[str]) -> ParseTree:
    """Parse a token list into the unique tree; raises ParseError when no
    derivation exists and AmbiguityError when more than one does."""
    prods = g.productions
    by_lhs: dict[str, list[int]] = {}
    for i, p in enumerate(prods):
        by_lhs.setdefault(p.lhs, []).append(i)
    nullable = _nullable(g)

    n = len(tokens)
    chart: list[set[_Item]] = [set() for _ in range(n + 1)]
    order: list[list[_Item]] = [[] for _ in range(n + 1)]

    def add(k: int, item: _Item):
        if item not in chart[k]:
            chart[k].add(item)
            order[k].append(item)

    for i in by_lhs.get(g.start, []):
        add(0, _Item(i, 0, 0))

    for k in range(n + 1):
        idx = 0
        while idx < len(order[k]):
            item = order[k][idx]
            idx += 1
            p = prods[item.prod]
            if item.dot < len(p.rhs):
                sym = p.rhs[item.dot]
                if sym.terminal:
                    if k < n and tokens[k] == sym.text:
                        add(k + 1, _Item(item.prod, item.dot + 1, item.origin))
                else:
                    for i in by_lhs.get(sym.text, []):
                        add(k, _Item(i, 0, k))
                    if sym.text in nullable:
                        # Aycock-Horspool fix for nullable nonterminals.
                        add(k, _Item(item.prod, item.dot + 1, item.origin))
            else:
                for prev in list(order[item.origin]):
                    q = prods[prev.prod]
                    if (prev.dot < len(q.rhs) and not q.rhs[prev.dot].terminal
                            and q.rhs[prev.dot].text == p.lhs):
                        add(k, _Item(prev.prod, prev.dot + 1, prev.origin))

    complete = [
        it for it in chart[n]
        if prods[it.prod].lhs == g.start and it.origin == 0
        and it.dot == len(prods[it.prod].rhs)
    ]
    if not complete:
        raise ParseError(*_furthest(g, prods, chart, tokens))

    builder = _TreeBuilder(g, prods, chart, tokens)
    trees = builder.derive_symbol(g.start, 0, n, limit=2)
    if len(trees) > 1:
        a, b = (serialize_tree(_number(t, tokens)) for t in trees[:2])
        raise AmbiguityError(a, b)
    return _number(trees[0], tokens)


def _furthest(g, prods, chart, tokens):
    position = max(k for k in range(len(chart)) if chart[k])
    expected = set()
    for it in chart[position]:
        p = prods[it.prod]
        if it.dot < len(p.rhs) and p.rhs[it.dot].terminal:
            expected.add(p.rhs[it.dot].text)
    return position, frozenset(expected)


@dataclass
class _Draft:
    symbol: str
    production: str | None
    children: tuple
    span: tuple[int, int]


class _TreeBuilder:
    """Extracts up to `limit` distinct derivations from a recognizer chart."""

    def __init__(self, g, prods, chart, tokens):
        self.g = g
        self.prods = prods
        self.tokens = tokens
        self.n = len(tokens)
        # completed[(lhs, start)] -> set of ends reachable via some production
        self.completed: dict[tuple[int, int], set[int]] = {}
        for k, items in enumerate(chart):
            for it in items:
                if it.dot == len(prods[it.prod].rhs):
                    self.completed.setdefault(
                        (it.prod, it.origin), set()).add(k)
        self.active: set[tuple[str, int, int]] = set()

    def derive_symbol(self, symbol: str, start: int, end: int, limit: int):
        key = (symbol, start, end)
        if key in self.active:
            # A derivation of X from X over the same span: infinitely many
            # derivations exist as soon as one does.
            raise AmbiguityError(
                f"{symbol} derives itself over tokens [{start},{end})",
                "cyclic unit derivation")
        self.active.add(key)
        try:
            out = []
            for i, p in enumerate(self.prods):
                if p.lhs != symbol:
                    continue
                if end not in self.completed.get((i, start), ()):
                    continue
                for children in self._splits(p, i, 0, start, end, limit):
                    out.append(_Draft(symbol, p.id, tuple(children),
                                      (start, end)))
                    if len(out) >= limit:
                        return out
            return out
        finally:
            self.active.discard(key)

    def _splits(self, p: Production, prod_idx: int, dot: int,
                at: int, end: int, limit: int):
        if dot == len(p.rhs):
            if at == end:
                yield []
            return
        sym = p.rhs[dot]
        if sym.terminal:
            if at < end and self.tokens[at] == sym.text:
                leaf = _Draft(sym.text, None, (), (at, at + 1))
                for rest in self._splits(p, prod_idx, dot + 1, at + 1, end,
                                         limit):
                    yield [leaf] + rest
            return
        for mid in range(at, end + 1):
            subs = self.derive_symbol(sym.text, at, mid, limit)
            for sub in subs:
                for rest in self._splits(p, prod_idx, dot + 1, mid, end,
                                         limit):
                    yield [sub] + rest


def _number(draft: _Draft, tokens) -> ParseTree:
    counter = [0]

    def build(d: _Draft) -> ParseNode:
        nid = counter[0]
        counter[0] += 1
        children = tuple(build(c) for c in d.children)
        return ParseNode(nid, d.symbol, d.production, children, d.span)

    return ParseTree(build(draft), tuple(tokens))


# ---------------------------------------------------------------------------
# Serialization: nested parenthesized text with explicit production ids.
# Nonterminal: ( "prod id" child ... )   Terminal leaf: "token"


def serialize_tree(t: ParseTree) -> str:
    def emit(n: ParseNode) -> str:
        if n.terminal:
            return _q(n.symbol)
        inner = " ".join([_q(n.production)] + [emit(c) for c in n.children])
        return f"({inner})"

    return emit(t.root) + "\n"


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def load_tree(g: Grammar, serialized: str) -> ParseTree:
    """Parse a serialized tree and cross-check every node against the
    grammar; raises FormatError on malformed input or shape mismatch."""
    toks = _sexpr_tokens(serialized)
    if not toks:
        raise FormatError("empty document")
    pos = [0]

    def parse() -> _Draft:
        if pos[0] >= len(toks):
            raise FormatError("unexpected end of document")
        kind, text = toks[pos[0]]
        pos[0] += 1
        if kind == "str":
            return _Draft(text, None, (), (0, 0))
        if kind != "(":
            raise FormatError("expected '(' or a quoted token")
        if pos[0] >= len(toks) or toks[pos[0]][0] != "str":
            raise FormatError("expected a production id after '('")
        prod_id = toks[pos[0]][1]
        pos[0] += 1
        children = []
        while pos[0] < len(toks) and toks[pos[0]][0] != ")":
            children.append(parse())
        if pos[0] >= len(toks):
            raise FormatError("missing ')'")
        pos[0] += 1
        try:
            p = g.production_by_id(prod_id)
        except KeyError:
            raise FormatError(f"unknown production id {prod_id!r}") from None
        if len(children) != len(p.rhs):
            raise FormatError(
                f"production {prod_id} expects {len(p.rhs)} children, "
                f"found {len(children)}")
        for c, sym in zip(children, p.rhs):
            if sym.terminal and (c.production is not None or c.symbol != sym.text):
                raise FormatError(
                    f"child of {prod_id} should be terminal {sym.render()}")
            if not sym.terminal and (c.production is None or c.symbol != sym.text):
                raise FormatError(
                    f"child of {prod_id} should be a {sym.text} subtree")
        return _Draft(p.lhs, prod_id, tuple(children), (0, 0))

    draft = parse()
    if pos[0] != len(toks):
        raise FormatError("trailing content after the tree")
    if draft.production is None or draft.symbol != g.start:
        raise FormatError(f"root must be the start symbol {g.start!r}")

    tokens: list[str] = []

    def respan(d: _Draft) -> _Draft:
        if d.production is None:
            start = len(tokens)
            tokens.append(d.symbol)
            return _Draft(d.symbol, None, (), (start, start + 1))
        children = tuple(respan(c) for c in d.children)
        if children:
            span = (children[0].span[0], children[-1].span[1])
        else:
            span = (len(tokens), len(tokens))
        return _Draft(d.symbol, d.production, children, span)

    draft = respan(draft)
    return _number(draft, tokens)


def _sexpr_tokens(text: str) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            out.append((c, c))
            i += 1
        elif c == '"':
            j, buf = i + 1, []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise FormatError("unterminated string")
            out.append(("str", "".join(buf)))
            i = j + 1
        else:
            raise FormatError(f"unexpected character {c!r}")
    return out
