"""Attribute-grammar descriptions: the `.ag` DSL, its AST, and static checks.

An `.ag` file declares a context-free skeleton plus attributes and semantic
rules in Bochmann normal form: each rule defines either a synthesized
attribute of the production's left-hand side or an inherited attribute of a
right-hand-side nonterminal, and may read only inherited attributes of the
LHS and synthesized attributes of RHS nonterminals.

Surface syntax (full EBNF in docs/dsl.md)::

    grammar g1;
    start F;
    terminals ".", "0", "1";

    nonterminal L { inh pos: int; syn val: rational; }

    production L ::= B L1 {
        L1.pos = L.pos + 1;
        B.pos  = L.pos + 1;
        L.val  = B.val + L1.val;
    }

The LHS is referenced by its bare name; when a nonterminal occurs more than
once in a production, RHS occurrences take numeric suffixes left-to-right
starting at 1 (`L1` above).  Nonterminal names must not end in a digit.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from fractions import Fraction

from .values import ANY, BOOL, INT, LIST, MAP, RATIONAL, SORTS, STRING

# ---------------------------------------------------------------------------
# Errors and source spans


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


class GrammarError(Exception):
    """Raised for the first violated invariant while parsing/checking an AG."""

    def __init__(self, code: str, message: str, span: Span | None = None):
        super().__init__(message if span is None else f"{span}: {message}")
        self.code = code
        self.message = message
        self.span = span


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class AttrDecl:
    name: str
    kind: str  # "inh" | "syn"
    sort: str


@dataclass(frozen=True)
class NonterminalDecl:
    name: str
    inherited: tuple[AttrDecl, ...]
    synthesized: tuple[AttrDecl, ...]

    def attr(self, name: str) -> AttrDecl | None:
        for a in self.inherited + self.synthesized:
            if a.name == name:
                return a
        return None


@dataclass(frozen=True)
class Sym:
    """One right-hand-side symbol: a nonterminal name or a quoted terminal."""

    text: str
    terminal: bool

    def render(self) -> str:
        return _quote(self.text) if self.terminal else self.text


@dataclass(frozen=True)
class Occ:
    """A resolved attribute occurrence: position 0 is the LHS, k>=1 the k-th
    RHS symbol (1-based over the full RHS, terminals included)."""

    pos: int
    attr: str


# Expression nodes.  Spans are carried for diagnostics but never compared, so
# grammars parsed from differently formatted sources still test equal.


@dataclass(frozen=True)
class Lit:
    value: object
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Ref:
    occ: Occ
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Expr", ...]
    span: Span | None = field(default=None, compare=False, repr=False)


Expr = Lit | Ref | Unary | Binary | If | Call

# Builtins: name -> (argument sorts, result sort).  NUM means int-or-rational.
NUM = "num"
BUILTINS = {
    "pow2": ((INT,), RATIONAL),
    "len": ((ANY,), INT),
    "concat": ((STRING, STRING), STRING),
    "map_empty": ((), MAP),
    "map_insert": ((MAP, STRING, ANY), MAP),
    "map_lookup": ((MAP, STRING), ANY),
    "map_contains": ((MAP, STRING), BOOL),
    "list_append": ((LIST, ANY), LIST),
    "error": ((STRING,), ANY),
}


@dataclass(frozen=True)
class SemanticRule:
    id: str  # "<production id> / <target as written>"
    target: Occ
    expr: Expr
    span: Span = field(compare=False)


@dataclass(frozen=True)
class Production:
    id: str  # canonical "L ::= B L1" rendering; stable across rule edits
    lhs: str
    rhs: tuple[Sym, ...]
    rules: tuple[SemanticRule, ...]
    span: Span = field(compare=False)

    def occ_name(self, pos: int) -> str:
        """The DSL name for an occurrence position (`L`, `L1`, `B`, ...)."""
        if pos == 0:
            return self.lhs
        sym = self.rhs[pos - 1]
        if sym.terminal:
            return sym.render()
        total = (self.lhs == sym.text) + sum(
            1 for s in self.rhs if not s.terminal and s.text == sym.text
        )
        if total <= 1:
            return sym.text
        nth = sum(
            1
            for s in self.rhs[: pos - 1]
            if not s.terminal and s.text == sym.text
        )
        return f"{sym.text}{nth + 1}"

    def nonterminal_positions(self) -> list[int]:
        return [i + 1 for i, s in enumerate(self.rhs) if not s.terminal]


@dataclass(frozen=True)
class Grammar:
    name: str
    start: str
    terminals: frozenset[str]
    nonterminals: tuple[NonterminalDecl, ...]
    productions: tuple[Production, ...]

    def decl(self, name: str) -> NonterminalDecl:
        return self._decls[name]

    def prods_for(self, name: str) -> tuple[Production, ...]:
        return self._by_lhs.get(name, ())

    def rule_by_id(self, rule_id: str) -> SemanticRule:
        return self._rules[rule_id]

    def production_by_id(self, prod_id: str) -> Production:
        return self._prods[prod_id]

    @property
    def rules(self) -> tuple[SemanticRule, ...]:
        return tuple(self._rules.values())

    def __post_init__(self):
        decls = {d.name: d for d in self.nonterminals}
        by_lhs: dict[str, tuple[Production, ...]] = {}
        for p in self.productions:
            by_lhs[p.lhs] = by_lhs.get(p.lhs, ()) + (p,)
        rules = {r.id: r for p in self.productions for r in p.rules}
        prods = {p.id: p for p in self.productions}
        object.__setattr__(self, "_decls", decls)
        object.__setattr__(self, "_by_lhs", by_lhs)
        object.__setattr__(self, "_rules", rules)
        object.__setattr__(self, "_prods", prods)


# ---------------------------------------------------------------------------
# Lexer

KEYWORDS = {
    "grammar", "start", "terminals", "nonterminal", "production",
    "inh", "syn", "if", "then", "else", "and", "or", "not", "true", "false",
    "int", "rational", "bool", "string", "list", "map",
}

_PUNCT = ("::=", "==", "!=", "<=", ">=", "{", "}", "(", ")", ";", ":", ",",
          "=", "+", "-", "*", "/", "<", ">", ".", "|")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | keyword | int | string | punct | eof
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col, self.line, self.col + len(self.text))


def _lex(src: str) -> list[Token]:
    toks: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if c in " \t\r":
            i, col = i + 1, col + 1
            continue
        if c == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c == '"':
            j, text = i + 1, []
            while j < n and src[j] != '"':
                if src[j] == "\\" and j + 1 < n:
                    text.append(src[j + 1])
                    j += 2
                else:
                    text.append(src[j])
                    j += 1
            if j >= n:
                raise GrammarError("syntax", "unterminated string literal",
                                   Span(line, col, line, col + 1))
            toks.append(Token("string", "".join(text), line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("int", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            text = src[i:j]
            kind = "keyword" if text in KEYWORDS else "ident"
            toks.append(Token(kind, text, line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if src.startswith(p, i):
                toks.append(Token("punct", p, line, col))
                col += len(p)
                i += len(p)
                break
        else:
            raise GrammarError("syntax", f"unexpected character {c!r}",
                               Span(line, col, line, col + 1))
    toks.append(Token("eof", "", line, col))
    return toks


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, src: str):
        self.toks = _lex(src)
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.pos]

    def _fail(self, msg: str):
        raise GrammarError("syntax", msg, self.cur.span)

    def eat(self, kind: str, text: str | None = None) -> Token:
        t = self.cur
        if t.kind != kind or (text is not None and t.text != text):
            want = text if text is not None else kind
            self._fail(f"expected {want!r}, found {t.text!r}")
        self.pos += 1
        return t

    def eat_punct(self, text: str) -> Token:
        return self.eat("punct", text)

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.cur
        return t.kind == kind and (text is None or t.text == text)

    # -- top level ----------------------------------------------------------

    def grammar(self) -> Grammar:
        if self.at("eof"):
            self._fail("empty grammar description")
        self.eat("keyword", "grammar")
        name = self.eat("ident").text
        self.eat_punct(";")
        self.eat("keyword", "start")
        start = self.eat("ident").text
        self.eat_punct(";")
        self.eat("keyword", "terminals")
        terminals = [self.eat("string").text]
        while self.at("punct", ","):
            self.pos += 1
            terminals.append(self.eat("string").text)
        self.eat_punct(";")

        decls: list[NonterminalDecl] = []
        while self.at("keyword", "nonterminal"):
            decls.append(self.nonterminal())
        prods: list[_RawProduction] = []
        while self.at("keyword", "production"):
            prods.append(self.production())
        if not self.at("eof"):
            self._fail("expected 'production' or end of file")
        return _check(name, start, terminals, decls, prods)

    def nonterminal(self) -> NonterminalDecl:
        self.eat("keyword", "nonterminal")
        tok = self.eat("ident")
        if tok.text[-1] in string.digits:
            raise GrammarError(
                "syntax",
                f"nonterminal name {tok.text!r} must not end in a digit "
                "(digit suffixes denote repeated occurrences)",
                tok.span,
            )
        self.eat_punct("{")
        inh: list[AttrDecl] = []
        syn: list[AttrDecl] = []
        seen: set[str] = set()
        while not self.at("punct", "}"):
            kind = self.eat("keyword").text
            if kind not in ("inh", "syn"):
                self._fail("expected 'inh' or 'syn'")
            attr = self.eat("ident")
            self.eat_punct(":")
            sort = self.eat("keyword").text
            if sort not in SORTS:
                self._fail(f"unknown sort {sort!r}")
            self.eat_punct(";")
            if attr.text in seen:
                raise GrammarError(
                    "duplicate-attr",
                    f"attribute {attr.text!r} declared twice on {tok.text}",
                    attr.span,
                )
            seen.add(attr.text)
            (inh if kind == "inh" else syn).append(AttrDecl(attr.text, kind, sort))
        self.eat_punct("}")
        return NonterminalDecl(tok.text, tuple(inh), tuple(syn))

    def production(self) -> "_RawProduction":
        start_tok = self.eat("keyword", "production")
        lhs = self.eat("ident").text
        self.eat_punct("::=")
        rhs: list[Sym] = []
        while not self.at("punct", "{"):
            if self.at("ident"):
                rhs.append(Sym(self.eat("ident").text, terminal=False))
            elif self.at("string"):
                rhs.append(Sym(self.eat("string").text, terminal=True))
            else:
                self._fail("expected a symbol or '{'")
        self.eat_punct("{")
        rules: list[_RawRule] = []
        while not self.at("punct", "}"):
            rules.append(self.rule())
        self.eat_punct("}")
        span = Span(start_tok.line, start_tok.col, self.toks[self.pos - 1].line,
                    self.toks[self.pos - 1].col + 1)
        return _RawProduction(lhs, tuple(rhs), tuple(rules), span)

    def rule(self) -> "_RawRule":
        name = self.eat("ident")
        self.eat_punct(".")
        attr = self.eat("ident")
        self.eat_punct("=")
        expr = self.expr()
        end = self.eat_punct(";")
        span = Span(name.line, name.col, end.line, end.col + 1)
        return _RawRule(name.text, attr.text, expr, span, name.span)

    # -- expressions --------------------------------------------------------

    def expr(self) -> "_RawExpr":
        if self.at("keyword", "if"):
            tok = self.eat("keyword", "if")
            cond = self.expr()
            self.eat("keyword", "then")
            then = self.expr()
            self.eat("keyword", "else")
            orelse = self.expr()
            return _RawExpr("if", (cond, then, orelse), tok.span)
        return self.or_expr()

    def or_expr(self):
        e = self.and_expr()
        while self.at("keyword", "or"):
            tok = self.eat("keyword")
            e = _RawExpr("binary:or", (e, self.and_expr()), tok.span)
        return e

    def and_expr(self):
        e = self.not_expr()
        while self.at("keyword", "and"):
            tok = self.eat("keyword")
            e = _RawExpr("binary:and", (e, self.not_expr()), tok.span)
        return e

    def not_expr(self):
        if self.at("keyword", "not"):
            tok = self.eat("keyword")
            return _RawExpr("unary:not", (self.not_expr(),), tok.span)
        return self.cmp_expr()

    def cmp_expr(self):
        e = self.add_expr()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.at("punct", op):
                tok = self.eat_punct(op)
                return _RawExpr(f"binary:{op}", (e, self.add_expr()), tok.span)
        return e

    def add_expr(self):
        e = self.mul_expr()
        while self.at("punct", "+") or self.at("punct", "-"):
            tok = self.eat("punct")
            e = _RawExpr(f"binary:{tok.text}", (e, self.mul_expr()), tok.span)
        return e

    def mul_expr(self):
        e = self.unary_expr()
        while self.at("punct", "*") or self.at("punct", "/"):
            tok = self.eat("punct")
            e = _RawExpr(f"binary:{tok.text}", (e, self.unary_expr()), tok.span)
        return e

    def unary_expr(self):
        if self.at("punct", "-"):
            tok = self.eat_punct("-")
            return _RawExpr("unary:-", (self.unary_expr(),), tok.span)
        return self.primary()

    def primary(self):
        t = self.cur
        if t.kind == "int":
            self.pos += 1
            return _RawExpr("int", (int(t.text),), t.span)
        if t.kind == "string":
            self.pos += 1
            return _RawExpr("string", (t.text,), t.span)
        if t.kind == "keyword" and t.text in ("true", "false"):
            self.pos += 1
            return _RawExpr("bool", (t.text == "true",), t.span)
        if t.kind == "punct" and t.text == "(":
            self.pos += 1
            e = self.expr()
            self.eat_punct(")")
            return e
        if t.kind == "ident":
            self.pos += 1
            if self.at("punct", "("):
                self.pos += 1
                args: list[_RawExpr] = []
                if not self.at("punct", ")"):
                    args.append(self.expr())
                    while self.at("punct", ","):
                        self.pos += 1
                        args.append(self.expr())
                self.eat_punct(")")
                return _RawExpr("call", (t.text, tuple(args)), t.span)
            self.eat_punct(".")
            attr = self.eat("ident")
            return _RawExpr("ref", (t.text, attr.text), t.span)
        self._fail(f"unexpected token {t.text!r} in expression")


@dataclass(frozen=True)
class _RawExpr:
    kind: str
    payload: tuple
    span: Span


@dataclass(frozen=True)
class _RawRule:
    occ_name: str
    attr: str
    expr: _RawExpr
    span: Span
    name_span: Span


@dataclass(frozen=True)
class _RawProduction:
    lhs: str
    rhs: tuple[Sym, ...]
    rules: tuple[_RawRule, ...]
    span: Span


# ---------------------------------------------------------------------------
# Static checks: resolution, normal form, completeness, sorts


def _check(name, start, terminals, decls, raws) -> Grammar:
    decl_map = {d.name: d for d in decls}
    term_set = frozenset(terminals)
    if start not in decl_map:
        raise GrammarError("undeclared-symbol",
                           f"start symbol {start!r} is not declared")
    if decl_map[start].inherited:
        raise GrammarError(
            "start-inherited",
            f"start symbol {start!r} must not have inherited attributes")
    if not raws:
        raise GrammarError("no-productions", "grammar has no productions")

    productions = []
    for raw in raws:
        if raw.lhs not in decl_map:
            raise GrammarError("undeclared-symbol",
                               f"undeclared nonterminal {raw.lhs!r}", raw.span)
        rhs: list[Sym] = []
        written: list[str] = []
        for sym in raw.rhs:
            if sym.terminal:
                if sym.text not in term_set:
                    raise GrammarError("undeclared-symbol",
                                       f"terminal {sym.render()} is not listed",
                                       raw.span)
                rhs.append(sym)
                written.append(sym.render())
                continue
            # RHS occurrences of a repeated nonterminal are written with a
            # numeric suffix (L ::= B L1); strip it to find the declaration.
            base = sym.text
            if base not in decl_map:
                stripped = base.rstrip(string.digits)
                if stripped in decl_map:
                    base = stripped
                else:
                    raise GrammarError("undeclared-symbol",
                                       f"undeclared nonterminal {sym.text!r}",
                                       raw.span)
            rhs.append(Sym(base, terminal=False))
            written.append(sym.text)
        raw = _RawProduction(raw.lhs, tuple(rhs), raw.rules, raw.span)
        skeleton = Production("", raw.lhs, raw.rhs, (), raw.span)
        for i, wname in enumerate(written):
            want = skeleton.occ_name(i + 1)
            if not raw.rhs[i].terminal and wname != want:
                raise GrammarError(
                    "syntax",
                    f"occurrence {i + 1} of the RHS must be written {want!r}, "
                    f"found {wname!r}",
                    raw.span,
                )
        prod_id = f"{raw.lhs} ::= " + " ".join(
            skeleton.occ_name(i + 1) if not s.terminal else s.render()
            for i, s in enumerate(raw.rhs)
        )
        prod_id = prod_id.rstrip()
        productions.append((raw, prod_id))

    for d in decls:
        if not any(raw.lhs == d.name for raw, _ in productions):
            raise GrammarError("no-productions",
                               f"nonterminal {d.name!r} has no production")

    built: list[Production] = []
    for raw, prod_id in productions:
        skeleton = Production(prod_id, raw.lhs, raw.rhs, (), raw.span)
        names = _occurrence_names(skeleton)
        rules: list[SemanticRule] = []
        defined: dict[Occ, _RawRule] = {}
        for rr in raw.rules:
            occ = _resolve_target(skeleton, decl_map, names, rr)
            if occ in defined:
                raise GrammarError(
                    "duplicate-rule",
                    f"attribute occurrence {rr.occ_name}.{rr.attr} is defined "
                    f"twice in production {prod_id}",
                    rr.span,
                )
            defined[occ] = rr
            expr = _resolve_expr(skeleton, decl_map, names, rr.expr)
            rules.append(SemanticRule(
                f"{prod_id} / {skeleton.occ_name(occ.pos)}.{rr.attr}",
                occ, expr, rr.span))
        for occ, label in _required_targets(skeleton, decl_map):
            if occ not in defined:
                raise GrammarError(
                    "missing-rule",
                    f"no rule defines {label} in production {prod_id}",
                    raw.span,
                )
        built.append(Production(prod_id, raw.lhs, raw.rhs, tuple(rules), raw.span))

    g = Grammar(name, start, term_set, tuple(decls), tuple(built))
    for p in g.productions:
        for r in p.rules:
            _typecheck_rule(g, p, r)
    return g


def _occurrence_names(p: Production) -> dict[str, int]:
    """Map DSL occurrence names to positions (0 = LHS)."""
    names = {p.occ_name(0): 0}
    for pos in p.nonterminal_positions():
        names[p.occ_name(pos)] = pos
    return names


def _required_targets(p: Production, decls) -> list[tuple[Occ, str]]:
    req = []
    for a in decls[p.lhs].synthesized:
        req.append((Occ(0, a.name), f"{p.occ_name(0)}.{a.name}"))
    for pos in p.nonterminal_positions():
        for a in decls[p.rhs[pos - 1].text].inherited:
            req.append((Occ(pos, a.name), f"{p.occ_name(pos)}.{a.name}"))
    return req


def _resolve_occ(p: Production, decls, names, occ_name, attr, span) -> Occ:
    if occ_name not in names:
        raise GrammarError(
            "illegal-occurrence",
            f"{occ_name!r} does not name an occurrence in production {p.id}",
            span,
        )
    pos = names[occ_name]
    sym = p.lhs if pos == 0 else p.rhs[pos - 1].text
    if decls[sym].attr(attr) is None:
        raise GrammarError(
            "illegal-occurrence",
            f"nonterminal {sym!r} has no attribute {attr!r}",
            span,
        )
    return Occ(pos, attr)


def _resolve_target(p, decls, names, rr: _RawRule) -> Occ:
    occ = _resolve_occ(p, decls, names, rr.occ_name, rr.attr, rr.name_span)
    sym = p.lhs if occ.pos == 0 else p.rhs[occ.pos - 1].text
    kind = decls[sym].attr(occ.attr).kind
    if occ.pos == 0 and kind != "syn":
        raise GrammarError(
            "illegal-occurrence",
            f"rule target {rr.occ_name}.{rr.attr} must be a synthesized "
            "attribute of the LHS or an inherited attribute of an RHS "
            "nonterminal",
            rr.name_span,
        )
    if occ.pos != 0 and kind != "inh":
        raise GrammarError(
            "illegal-occurrence",
            f"rule target {rr.occ_name}.{rr.attr} must be a synthesized "
            "attribute of the LHS or an inherited attribute of an RHS "
            "nonterminal",
            rr.name_span,
        )
    return occ


def _resolve_expr(p, decls, names, raw: _RawExpr) -> Expr:
    k = raw.kind
    if k == "int":
        return Lit(raw.payload[0], raw.span)
    if k == "string":
        return Lit(raw.payload[0], raw.span)
    if k == "bool":
        return Lit(raw.payload[0], raw.span)
    if k == "ref":
        occ_name, attr = raw.payload
        occ = _resolve_occ(p, decls, names, occ_name, attr, raw.span)
        sym = p.lhs if occ.pos == 0 else p.rhs[occ.pos - 1].text
        kind = decls[sym].attr(attr).kind
        legal = (occ.pos == 0 and kind == "inh") or (occ.pos != 0 and kind == "syn")
        if not legal:
            raise GrammarError(
                "illegal-occurrence",
                f"rule may not read {occ_name}.{attr}: only inherited "
                "attributes of the LHS and synthesized attributes of RHS "
                "nonterminals are readable",
                raw.span,
            )
        return Ref(occ, raw.span)
    if k == "if":
        c, t, e = (_resolve_expr(p, decls, names, x) for x in raw.payload)
        return If(c, t, e, raw.span)
    if k.startswith("unary:"):
        op = k.split(":", 1)[1]
        operand = _resolve_expr(p, decls, names, raw.payload[0])
        if op == "-" and isinstance(operand, Lit) \
                and isinstance(operand.value, int) \
                and not isinstance(operand.value, bool):
            return Lit(-operand.value, raw.span)
        return Unary(op, operand, raw.span)
    if k.startswith("binary:"):
        left = _resolve_expr(p, decls, names, raw.payload[0])
        right = _resolve_expr(p, decls, names, raw.payload[1])
        return Binary(k.split(":", 1)[1], left, right, raw.span)
    if k == "call":
        fn, args = raw.payload
        if fn not in BUILTINS:
            raise GrammarError("syntax", f"unknown builtin {fn!r}", raw.span)
        want, _ = BUILTINS[fn]
        if len(args) != len(want):
            raise GrammarError(
                "type-mismatch",
                f"{fn} expects {len(want)} argument(s), got {len(args)}",
                raw.span,
            )
        return Call(fn, tuple(_resolve_expr(p, decls, names, a) for a in args),
                    raw.span)
    raise AssertionError(k)


def occ_sort(g: Grammar, p: Production, occ: Occ) -> str:
    sym = p.lhs if occ.pos == 0 else p.rhs[occ.pos - 1].text
    return g.decl(sym).attr(occ.attr).sort


def expr_sort(g: Grammar, p: Production, e: Expr) -> str:
    """Static sort of an expression; raises GrammarError on a mismatch."""
    if isinstance(e, Lit):
        v = e.value
        if isinstance(v, bool):
            return BOOL
        if isinstance(v, int):
            return INT
        if isinstance(v, Fraction):
            return RATIONAL
        return STRING
    if isinstance(e, Ref):
        return occ_sort(g, p, e.occ)
    if isinstance(e, Unary):
        s = expr_sort(g, p, e.operand)
        if e.op == "-":
            _want_numeric(s, e)
            return s
        _want(s, BOOL, e)
        return BOOL
    if isinstance(e, Binary):
        ls = expr_sort(g, p, e.left)
        rs = expr_sort(g, p, e.right)
        if e.op in ("+", "-", "*"):
            _want_numeric(ls, e)
            _want_numeric(rs, e)
            if RATIONAL in (ls, rs):
                return RATIONAL
            return ANY if ANY in (ls, rs) else INT
        if e.op == "/":
            _want_numeric(ls, e)
            _want_numeric(rs, e)
            return RATIONAL
        if e.op in ("and", "or"):
            _want(ls, BOOL, e)
            _want(rs, BOOL, e)
            return BOOL
        if e.op in ("==", "!="):
            if not _comparable(ls, rs):
                raise GrammarError(
                    "type-mismatch",
                    f"cannot compare {ls} with {rs}", e.span)
            return BOOL
        # ordering
        for s in (ls, rs):
            if s not in (INT, RATIONAL, STRING, ANY):
                raise GrammarError(
                    "type-mismatch", f"{e.op} is not defined on {s}", e.span)
        if not _comparable(ls, rs):
            raise GrammarError(
                "type-mismatch", f"cannot compare {ls} with {rs}", e.span)
        return BOOL
    if isinstance(e, If):
        _want(expr_sort(g, p, e.cond), BOOL, e)
        ts = expr_sort(g, p, e.then)
        es = expr_sort(g, p, e.orelse)
        if ts == es:
            return ts
        if ANY in (ts, es):
            return ts if es == ANY else es
        if {ts, es} == {INT, RATIONAL}:
            return RATIONAL
        raise GrammarError(
            "type-mismatch",
            f"if branches have different sorts ({ts} vs {es})", e.span)
    if isinstance(e, Call):
        want, result = BUILTINS[e.fn]
        for arg, w in zip(e.args, want):
            s = expr_sort(g, p, arg)
            if w == ANY:
                continue
            if not _sort_ok(s, w):
                raise GrammarError(
                    "type-mismatch",
                    f"{e.fn} argument has sort {s}, expected {w}", e.span)
        return result
    raise AssertionError(e)


def _comparable(a: str, b: str) -> bool:
    if ANY in (a, b) or a == b:
        return True
    return {a, b} == {INT, RATIONAL}


def _sort_ok(have: str, want: str) -> bool:
    if have == want or have == ANY:
        return True
    return have == INT and want == RATIONAL


def _want(s: str, want: str, e: Expr):
    if not _sort_ok(s, want):
        raise GrammarError("type-mismatch",
                           f"expected {want}, found {s}", e.span)


def _want_numeric(s: str, e: Expr):
    if s not in (INT, RATIONAL, ANY):
        raise GrammarError("type-mismatch",
                           f"expected a numeric sort, found {s}", e.span)


def _typecheck_rule(g: Grammar, p: Production, r: SemanticRule):
    target = occ_sort(g, p, r.target)
    s = expr_sort(g, p, r.expr)
    if not _sort_ok(s, target):
        raise GrammarError(
            "type-mismatch",
            f"rule {r.id} assigns {s} to an attribute of sort {target}",
            r.span,
        )


def free_occurrences(e: Expr) -> list[Occ]:
    """Attribute occurrences read by an expression, left-to-right."""
    out: list[Occ] = []

    def walk(x: Expr):
        if isinstance(x, Ref):
            out.append(x.occ)
        elif isinstance(x, Unary):
            walk(x.operand)
        elif isinstance(x, Binary):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, If):
            walk(x.cond)
            walk(x.then)
            walk(x.orelse)
        elif isinstance(x, Call):
            for a in x.args:
                walk(a)

    walk(e)
    return out


# ---------------------------------------------------------------------------
# Public entry points


def parse_grammar(source: str) -> Grammar:
    """Parse and validate an `.ag` description; raises GrammarError on the
    first violated invariant, carrying a source span."""
    return _Parser(source).grammar()


@dataclass(frozen=True)
class SameShape:
    pass


@dataclass(frozen=True)
class ShapeMismatch:
    reasons: tuple[str, ...]


def validate_against(g: Grammar, reference: Grammar) -> SameShape | ShapeMismatch:
    """Check that two grammars share their CFG skeleton and attribute
    declarations, differing at most in semantic-rule bodies."""
    reasons: list[str] = []
    if g.start != reference.start:
        reasons.append(f"start symbol differs: {g.start} vs {reference.start}")
    if g.terminals != reference.terminals:
        reasons.append("terminal sets differ")
    mine = {d.name: d for d in g.nonterminals}
    theirs = {d.name: d for d in reference.nonterminals}
    if set(mine) != set(theirs):
        reasons.append("nonterminal sets differ")
    else:
        for name in mine:
            if mine[name] != theirs[name]:
                reasons.append(f"attribute declarations differ on {name}")
    if [p.id for p in g.productions] != [p.id for p in reference.productions]:
        reasons.append("production lists differ")
    else:
        for p, q in zip(g.productions, reference.productions):
            if {r.id for r in p.rules} != {r.id for r in q.rules}:
                reasons.append(f"rule targets differ in production {p.id}")
    return ShapeMismatch(tuple(reasons)) if reasons else SameShape()


def render_expr(e: Expr, p: Production) -> str:
    return _render(e, p, 0)


_PREC = {"or": 1, "and": 2, "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6}


def _render(e: Expr, p: Production, prec: int) -> str:
    if isinstance(e, Lit):
        v = e.value
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return _quote(v)
        return str(v)
    if isinstance(e, Ref):
        return f"{p.occ_name(e.occ.pos)}.{e.occ.attr}"
    if isinstance(e, Unary):
        body = _render(e.operand, p, 7)
        return f"-{body}" if e.op == "-" else f"not {body}"
    if isinstance(e, Binary):
        mine = _PREC[e.op]
        s = f"{_render(e.left, p, mine)} {e.op} {_render(e.right, p, mine + 1)}"
        return f"({s})" if mine < prec else s
    if isinstance(e, If):
        s = (f"if {_render(e.cond, p, 0)} then {_render(e.then, p, 0)} "
             f"else {_render(e.orelse, p, 0)}")
        return f"({s})" if prec > 0 else s
    if isinstance(e, Call):
        args = ", ".join(_render(a, p, 0) for a in e.args)
        return f"{e.fn}({args})"
    raise AssertionError(e)


def render_grammar(g: Grammar) -> str:
    """Pretty-print a grammar in canonical DSL form; parsing the output
    yields a structurally identical grammar."""
    out = [f"grammar {g.name};", f"start {g.start};"]
    terms = ", ".join(_quote(t) for t in sorted(g.terminals))
    out.append(f"terminals {terms};")
    out.append("")
    for d in g.nonterminals:
        attrs = [f"    inh {a.name}: {a.sort};" for a in d.inherited]
        attrs += [f"    syn {a.name}: {a.sort};" for a in d.synthesized]
        out.append(f"nonterminal {d.name} {{")
        out.extend(attrs)
        out.append("}")
    out.append("")
    for p in g.productions:
        out.append(f"production {p.id} {{")
        for r in p.rules:
            tgt = f"{p.occ_name(r.target.pos)}.{r.target.attr}"
            out.append(f"    {tgt} = {render_expr(r.expr, p)};")
        out.append("}")
        out.append("")
    return "\n".join(out)
