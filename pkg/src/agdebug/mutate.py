"""Single-rule mutants of an AG description, and the bench harness.

Mutants supply (buggy, intended) pairs for the soundness property suite:
each mutant changes exactly one rule body and preserves the grammar shape,
so the reference oracle applies.  The bench runs every strategy over a
mutant corpus and emits a table shaped like the paper's query-count
comparison: #attrs, #nds, then queries(candidates) per strategy, with
pure-AD rows marked n/a on traces that end in a runtime error.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace as dc_replace

from .evaluator import count_instances, evaluate
from .grammar import (Binary, Call, Expr, Grammar, If, Lit, Occ, Production,
                      Ref, SameShape, SemanticRule, Unary, expr_sort,
                      occ_sort, validate_against)
from .sentence import parse_sentence, tokenize
from .session import AdUnavailableError, ReferenceOracle, run_session
from .values import INT


@dataclass(frozen=True)
class Mutation:
    rule_id: str
    operator: str  # ConstShift | OpSwap | OccurrenceSwap | IndexShift
    #                | DivByZero | LookupBreak
    detail: str
    seed: int | None = None


class NoMutationSite(Exception):
    pass


# An expression path addresses a subexpression: () is the root, integers
# descend into operands/arguments in evaluation order.


def _subexprs(e: Expr, path=()):  # yields (path, node)
    yield path, e
    if isinstance(e, Unary):
        yield from _subexprs(e.operand, path + (0,))
    elif isinstance(e, Binary):
        yield from _subexprs(e.left, path + (0,))
        yield from _subexprs(e.right, path + (1,))
    elif isinstance(e, If):
        yield from _subexprs(e.cond, path + (0,))
        yield from _subexprs(e.then, path + (1,))
        yield from _subexprs(e.orelse, path + (2,))
    elif isinstance(e, Call):
        for i, a in enumerate(e.args):
            yield from _subexprs(a, path + (i,))


def _replace_at(e: Expr, path, new: Expr) -> Expr:
    if not path:
        return new
    i, rest = path[0], path[1:]
    if isinstance(e, Unary):
        return Unary(e.op, _replace_at(e.operand, rest, new), e.span)
    if isinstance(e, Binary):
        if i == 0:
            return Binary(e.op, _replace_at(e.left, rest, new), e.right, e.span)
        return Binary(e.op, e.left, _replace_at(e.right, rest, new), e.span)
    if isinstance(e, If):
        parts = [e.cond, e.then, e.orelse]
        parts[i] = _replace_at(parts[i], rest, new)
        return If(parts[0], parts[1], parts[2], e.span)
    if isinstance(e, Call):
        args = list(e.args)
        args[i] = _replace_at(args[i], rest, new)
        return Call(e.fn, tuple(args), e.span)
    raise AssertionError(e)


_OP_SWAP = {"+": "-", "-": "+", "*": "/", "/": "*"}


def _readable_occurrences(g: Grammar, p: Production) -> list[Occ]:
    occs = [Occ(0, a.name) for a in g.decl(p.lhs).inherited]
    for pos in p.nonterminal_positions():
        for a in g.decl(p.rhs[pos - 1].text).synthesized:
            occs.append(Occ(pos, a.name))
    return occs


def enumerate_mutations(g: Grammar) -> list[tuple[Mutation, Grammar]]:
    """Every applicable single-rule mutant, in deterministic order."""
    out: list[tuple[Mutation, Grammar]] = []
    for p in g.productions:
        for r in p.rules:
            for mut, expr in _rule_variants(g, p, r):
                mutant = _with_rule_expr(g, p, r, expr)
                if isinstance(validate_against(mutant, g), SameShape):
                    out.append((mut, mutant))
    return out


def _rule_variants(g: Grammar, p: Production, r: SemanticRule):
    readable = _readable_occurrences(g, p)
    for path, node in _subexprs(r.expr):
        where = "/".join(map(str, path)) or "root"
        # ConstShift: integer literal +-1, or wrap an integer-sorted
        # occurrence / whole body in +-1 (the Fig.-1 bug is such a wrap).
        if isinstance(node, Lit) and isinstance(node.value, int) \
                and not isinstance(node.value, bool):
            for d in (1, -1):
                yield (Mutation(r.id, "ConstShift", f"{where}:{d:+d}"),
                       _replace_at(r.expr, path, Lit(node.value + d, node.span)))
        wrap_site = isinstance(node, Ref) or (path == () and not isinstance(node, Lit))
        if wrap_site and expr_sort(g, p, node) == INT:
            for d in (1, -1):
                op = "+" if d > 0 else "-"
                yield (Mutation(r.id, "ConstShift", f"{where}:wrap{d:+d}"),
                       _replace_at(r.expr, path,
                                   Binary(op, node, Lit(1, node.span), node.span)))
        if isinstance(node, Binary) and node.op in _OP_SWAP:
            swapped = Binary(_OP_SWAP[node.op], node.left, node.right, node.span)
            yield (Mutation(r.id, "OpSwap",
                            f"{where}:{node.op}->{_OP_SWAP[node.op]}"),
                   _replace_at(r.expr, path, swapped))
        if isinstance(node, Binary) and node.op == "/":
            yield (Mutation(r.id, "DivByZero", f"{where}:divisor->0"),
                   _replace_at(r.expr, path,
                               Binary("/", node.left, Lit(0, node.span),
                                      node.span)))
        if isinstance(node, Ref):
            my_sort = occ_sort(g, p, node.occ)
            for other in readable:
                if other == node.occ or occ_sort(g, p, other) != my_sort:
                    continue
                same_symbol = _occ_symbol(p, other) == _occ_symbol(p, node.occ)
                op_name = "IndexShift" if (same_symbol
                                           and other.attr == node.occ.attr) \
                    else "OccurrenceSwap"
                yield (Mutation(r.id, op_name,
                                f"{where}:{p.occ_name(node.occ.pos)}."
                                f"{node.occ.attr}->{p.occ_name(other.pos)}."
                                f"{other.attr}"),
                       _replace_at(r.expr, path, Ref(other, node.span)))
        if isinstance(node, Call) and node.fn in ("map_lookup", "map_contains"):
            key = node.args[1]
            if isinstance(key, Lit) and isinstance(key.value, str):
                broken = Call(node.fn,
                              (node.args[0], Lit(key.value + "?", key.span)),
                              node.span)
                yield (Mutation(r.id, "LookupBreak", f"{where}:key"),
                       _replace_at(r.expr, path, broken))


def _occ_symbol(p: Production, occ: Occ) -> str:
    return p.lhs if occ.pos == 0 else p.rhs[occ.pos - 1].text


def _with_rule_expr(g: Grammar, p: Production, r: SemanticRule,
                    expr: Expr) -> Grammar:
    new_rules = tuple(dc_replace(x, expr=expr) if x.id == r.id else x
                      for x in p.rules)
    new_prods = tuple(dc_replace(x, rules=new_rules) if x.id == p.id else x
                      for x in g.productions)
    return Grammar(g.name, g.start, g.terminals, g.nonterminals, new_prods)


def mutate_grammar(g: Grammar, seed: int) -> tuple[Grammar, Mutation]:
    """One deterministic single-rule mutant per seed."""
    variants = enumerate_mutations(g)
    if not variants:
        raise NoMutationSite("grammar offers no applicable mutation")
    mut, mutant = random.Random(seed).choice(variants)
    return mutant, dc_replace(mut, seed=seed)


# ---------------------------------------------------------------------------
# Bench


@dataclass(frozen=True)
class BenchRow:
    mutant: str
    rule_id: str
    operator: str
    input: str
    attrs: int
    nodes: int
    cells: dict  # strategy -> "q(c)" | "n/a (runtime error)"
    contains_bug: dict  # strategy -> bool | None


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]
    skipped: tuple[str, ...]  # mutants with no observable symptom

    def text(self) -> str:
        headers = ["mutant", "#attrs", "#nds", "Slice", "AD", "GAD"]
        table = [[r.mutant, str(r.attrs), str(r.nodes),
                  r.cells.get("slice", ""), r.cells.get("ad", ""),
                  r.cells.get("gad", "")] for r in self.rows]
        widths = [max(len(h), *(len(row[i]) for row in table)) if table
                  else len(h) for i, h in enumerate(headers)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
        for row in table:
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
        for s in self.skipped:
            lines.append(f"skipped (no observable symptom): {s}")
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        lines = ["mutant,rule,operator,input,#attrs,#nds,Slice,AD,GAD"]
        for r in self.rows:
            cells = [r.mutant, r.rule_id, r.operator, r.input,
                     str(r.attrs), str(r.nodes),
                     r.cells.get("slice", ""), r.cells.get("ad", ""),
                     r.cells.get("gad", "")]
            lines.append(",".join('"%s"' % c.replace('"', '""') for c in cells))
        return "\n".join(lines) + "\n"


def find_symptomatic_input(buggy: Grammar, intended: Grammar,
                           inputs: list[str]) -> str | None:
    """First input on which the mutant's observable behavior differs."""
    from .session import _has_symptom

    for text in inputs:
        tree = parse_sentence(buggy, tokenize(buggy, text))
        at = evaluate(buggy, tree)
        if _has_symptom(buggy, intended, at, tree):
            return text
    return None


def run_mutant(name: str, buggy: Grammar, intended: Grammar, mut: Mutation,
               inputs: list[str], strategies, epsilon: int = 1) -> BenchRow | None:
    text = find_symptomatic_input(buggy, intended, inputs)
    if text is None:
        return None
    tree = parse_sentence(buggy, tokenize(buggy, text))
    at = evaluate(buggy, tree)
    attrs, nodes = count_instances(at)
    cells, contains = {}, {}
    for strategy in strategies:
        try:
            out = run_session(buggy, text, strategy,
                              ReferenceOracle(intended), epsilon)
        except AdUnavailableError:
            cells[strategy] = "n/a (runtime error)"
            contains[strategy] = None
            continue
        n_rules = len(out.report.rules)
        cells[strategy] = f"{out.report.queries_asked}({n_rules})"
        contains[strategy] = any(r == mut.rule_id for r, _ in out.report.rules)
    return BenchRow(name, mut.rule_id, mut.operator, text, attrs, nodes,
                    cells, contains)


def bench(corpus, strategies=("slice", "ad", "gad"), trials: int = 40,
          epsilon: int = 1, jobs: int = 1, seed0: int = 0) -> BenchReport:
    """corpus: iterable of (name, intended Grammar, inputs).  Generates
    `trials` seeded mutants per grammar and benches each strategy."""
    tasks = []
    for name, intended, inputs in corpus:
        for t in range(trials):
            seed = seed0 + t
            buggy, mut = mutate_grammar(intended, seed)
            tasks.append((f"{name}#{seed}", buggy, intended, mut, inputs))

    def run(task):
        name, buggy, intended, mut, inputs = task
        return name, run_mutant(name, buggy, intended, mut, inputs,
                                strategies, epsilon)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    rows, skipped = [], []
    for name, row in results:
        if row is None:
            skipped.append(name)
        else:
            rows.append(row)
    return BenchReport(tuple(rows), tuple(skipped))
