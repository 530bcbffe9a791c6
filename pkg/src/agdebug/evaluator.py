"""Attribute evaluation over a parse tree with a full dynamic trace.

Semantic rules are instantiated per production instance, topologically
sorted along the attribute dependency graph, and evaluated in a
deterministic order.  Runtime faults (division by zero, failed map lookup,
the `error` builtin) do not abort: the faulting computation and everything
depending on it are left undefined while independent computations continue,
so the trace of a failed run is still debuggable.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from fractions import Fraction

from . import values as V
from .grammar import (Binary, Call, Expr, Grammar, If, Lit, Occ, Production,
                      Ref, SemanticRule, Unary, free_occurrences, occ_sort)
from .sentence import ParseNode, ParseTree
from .values import UNDEFINED, diff_values  # noqa: F401  (diff re-exported)

InstanceId = tuple[int, str]  # (node id, attribute name)


def instance_key(inst: InstanceId) -> str:
    return f"{inst[0]}.{inst[1]}"


def parse_instance_key(key: str) -> InstanceId:
    node, attr = key.split(".", 1)
    return (int(node), attr)


class CircularityError(Exception):
    def __init__(self, cycle: list[InstanceId]):
        pretty = " -> ".join(instance_key(i) for i in cycle)
        super().__init__(f"attribute dependencies are circular: {pretty}")
        self.cycle = cycle


class EvalFault(Exception):
    """Internal: a runtime fault inside one rule evaluation."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class AttrInstance:
    id: InstanceId
    kind: str  # inh | syn
    sort: str


@dataclass(frozen=True)
class CompInstance:
    """One application of one semantic rule at one production instance.

    The id equals the target attribute instance id: every evaluated
    instance has exactly one defining rule.
    """

    id: InstanceId
    rule_id: str
    location: int  # node at which the owning production is instantiated
    inputs: tuple[InstanceId, ...]
    output: InstanceId
    seq: int | None  # evaluation order; None if never executed


@dataclass(frozen=True)
class RuntimeFault:
    comp: InstanceId
    kind: str  # div_zero | lookup_missing | user_error
    message: str


@dataclass(frozen=True)
class AttributedTree:
    grammar: Grammar
    tree: ParseTree
    instances: dict[InstanceId, AttrInstance]
    values: dict[InstanceId, object]
    comps: dict[InstanceId, CompInstance]
    status: str  # completed | failed
    fault: RuntimeFault | None
    consumers: dict[InstanceId, tuple[InstanceId, ...]] = field(repr=False, default_factory=dict)

    def value(self, inst: InstanceId):
        return self.values[inst]

    def defined(self, inst: InstanceId) -> bool:
        return self.values[inst] is not UNDEFINED

    def inherited_instances(self, node_id: int) -> tuple[InstanceId, ...]:
        return self._per_node[node_id][0]

    def synthesized_instances(self, node_id: int) -> tuple[InstanceId, ...]:
        return self._per_node[node_id][1]

    def subtree_node_ids(self, node_id: int) -> tuple[int, ...]:
        return tuple(n.id for n in self.tree.node(node_id).walk())

    def comps_located_at(self, node_id: int) -> tuple[InstanceId, ...]:
        return self._at_node.get(node_id, ())

    def root_synthesized(self) -> tuple[InstanceId, ...]:
        return self.synthesized_instances(self.tree.root.id)

    def __post_init__(self):
        per_node: dict[int, tuple[tuple, tuple]] = {}
        for n in self.tree.nonterminal_nodes():
            decl = self.grammar.decl(n.symbol)
            inh = tuple((n.id, a.name) for a in decl.inherited)
            syn = tuple((n.id, a.name) for a in decl.synthesized)
            per_node[n.id] = (inh, syn)
        at_node: dict[int, list[InstanceId]] = {}
        for c in self.comps.values():
            at_node.setdefault(c.location, []).append(c.id)
        object.__setattr__(self, "_per_node", per_node)
        object.__setattr__(self, "_at_node",
                           {k: tuple(sorted(v)) for k, v in at_node.items()})


def _target_instance(node: ParseNode, rule: SemanticRule) -> InstanceId:
    if rule.target.pos == 0:
        return (node.id, rule.target.attr)
    return (node.children[rule.target.pos - 1].id, rule.target.attr)


def _occ_instance(node: ParseNode, occ: Occ) -> InstanceId:
    if occ.pos == 0:
        return (node.id, occ.attr)
    return (node.children[occ.pos - 1].id, occ.attr)


def evaluate(g: Grammar, t: ParseTree) -> AttributedTree:
    """Evaluate all attribute instances of `t` under `g`.

    Deterministic: among ready computations the one with the smallest
    (node id, attribute name) runs first.  Returns a Failed trace (never
    raises) on runtime faults; raises CircularityError on cyclic
    dependencies.
    """
    instances: dict[InstanceId, AttrInstance] = {}
    for n in t.nonterminal_nodes():
        decl = g.decl(n.symbol)
        for a in decl.inherited + decl.synthesized:
            inst = (n.id, a.name)
            instances[inst] = AttrInstance(inst, a.kind, a.sort)

    comps: dict[InstanceId, CompInstance] = {}
    exprs: dict[InstanceId, tuple[Production, SemanticRule, ParseNode]] = {}
    for n in t.nonterminal_nodes():
        p = g.production_by_id(n.production)
        for r in p.rules:
            out = _target_instance(n, r)
            inputs = tuple(_occ_instance(n, occ)
                           for occ in free_occurrences(r.expr))
            comps[out] = CompInstance(out, r.id, n.id, inputs, out, None)
            exprs[out] = (p, r, n)

    consumers: dict[InstanceId, list[InstanceId]] = {i: [] for i in instances}
    indegree: dict[InstanceId, int] = {i: len(set(comps[i].inputs)) if i in comps else 0
                                       for i in instances}
    for c in comps.values():
        for src in set(c.inputs):
            consumers[src].append(c.id)

    ready = [inst for inst in instances if indegree[inst] == 0]
    heapq.heapify(ready)
    vals: dict[InstanceId, object] = {}
    seq = 0
    fault: RuntimeFault | None = None
    done = 0
    while ready:
        inst = heapq.heappop(ready)
        done += 1
        if inst in comps:
            c = comps[inst]
            if any(vals.get(i, UNDEFINED) is UNDEFINED for i in c.inputs):
                vals[inst] = UNDEFINED  # upstream fault: never executed
            else:
                p, r, n = exprs[inst]
                try:
                    v = _eval_expr(r.expr, n, vals)
                    vals[inst] = V.coerce(v, occ_sort(g, p, r.target))
                    comps[inst] = CompInstance(inst, c.rule_id, c.location,
                                               c.inputs, inst, seq)
                    seq += 1
                except EvalFault as f:
                    vals[inst] = UNDEFINED
                    comps[inst] = CompInstance(inst, c.rule_id, c.location,
                                               c.inputs, inst, seq)
                    seq += 1
                    if fault is None:
                        fault = RuntimeFault(inst, f.kind, str(f))
        else:
            # An instance with no defining computation can only be an
            # inherited attribute of the root, which grammar invariants
            # exclude; defensive undefined.
            vals[inst] = UNDEFINED
        for consumer in consumers[inst]:
            indegree[consumer] -= 1
            if indegree[consumer] == 0:
                heapq.heappush(ready, consumer)

    if done != len(instances):
        remaining = [i for i in instances if indegree[i] > 0]
        raise CircularityError(_find_cycle(comps, remaining))

    return AttributedTree(
        grammar=g,
        tree=t,
        instances=instances,
        values=vals,
        comps=comps,
        status="completed" if fault is None else "failed",
        fault=fault,
        consumers={k: tuple(sorted(v)) for k, v in consumers.items()},
    )


def _find_cycle(comps, remaining) -> list[InstanceId]:
    remaining_set = set(remaining)
    start = min(remaining_set)
    path, seen = [], {}
    node = start
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = next(i for i in comps[node].inputs if i in remaining_set)
    return path[seen[node]:] + [node]


def _eval_expr(e: Expr, node: ParseNode, vals) -> object:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Ref):
        return vals[_occ_instance(node, e.occ)]
    if isinstance(e, Unary):
        v = _eval_expr(e.operand, node, vals)
        return (not v) if e.op == "not" else -v
    if isinstance(e, If):
        if _eval_expr(e.cond, node, vals):
            return _eval_expr(e.then, node, vals)
        return _eval_expr(e.orelse, node, vals)
    if isinstance(e, Binary):
        if e.op == "and":
            return bool(_eval_expr(e.left, node, vals)) and \
                bool(_eval_expr(e.right, node, vals))
        if e.op == "or":
            return bool(_eval_expr(e.left, node, vals)) or \
                bool(_eval_expr(e.right, node, vals))
        a = _eval_expr(e.left, node, vals)
        b = _eval_expr(e.right, node, vals)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0:
                raise EvalFault("div_zero", "division by zero")
            return Fraction(a) / Fraction(b)
        if e.op == "==":
            return V.values_equal(a, b)
        if e.op == "!=":
            return not V.values_equal(a, b)
        if e.op == "<":
            return a < b
        if e.op == "<=":
            return a <= b
        if e.op == ">":
            return a > b
        if e.op == ">=":
            return a >= b
        raise AssertionError(e.op)
    if isinstance(e, Call):
        args = [_eval_expr(a, node, vals) for a in e.args]
        return _call(e.fn, args)
    raise AssertionError(e)


def _call(fn: str, args: list):
    if fn == "pow2":
        return Fraction(2) ** args[0]
    if fn == "len":
        return len(args[0])
    if fn == "concat":
        return args[0] + args[1]
    if fn == "map_empty":
        return {}
    if fn == "map_insert":
        m = dict(args[0])
        m[args[1]] = args[2]
        return m
    if fn == "map_lookup":
        m, k = args
        if k not in m:
            raise EvalFault("lookup_missing", f"map has no key {k!r}")
        return m[k]
    if fn == "map_contains":
        return args[1] in args[0]
    if fn == "list_append":
        return tuple(args[0]) + (args[1],)
    if fn == "error":
        raise EvalFault("user_error", args[0])
    raise AssertionError(fn)


def count_instances(at: AttributedTree) -> tuple[int, int]:
    """(number of attribute instances, number of tree nodes incl. leaves)."""
    return len(at.instances), len(at.tree.nodes)


def forward_closure(at: AttributedTree, start: InstanceId) -> frozenset[InstanceId]:
    out = {start}
    stack = [start]
    while stack:
        for nxt in at.consumers.get(stack.pop(), ()):
            if nxt not in out:
                out.add(nxt)
                stack.append(nxt)
    return frozenset(out)


def backward_closure(at: AttributedTree, start: InstanceId) -> frozenset[InstanceId]:
    out = {start}
    stack = [start]
    while stack:
        inst = stack.pop()
        comp = at.comps.get(inst)
        if comp is None:
            continue
        for src in comp.inputs:
            if src not in out:
                out.add(src)
                stack.append(src)
    return frozenset(out)


def dump_trace(at: AttributedTree) -> str:
    """Line-oriented JSON trace export (format documented in docs/formats.md)."""
    lines = [json.dumps({
        "status": at.status,
        "fault": None if at.fault is None else {
            "comp": instance_key(at.fault.comp),
            "kind": at.fault.kind,
            "message": at.fault.message,
        },
    }, sort_keys=True)]
    for comp in sorted(at.comps.values(),
                       key=lambda c: (c.seq is None, c.seq, c.id)):
        v = at.values[comp.output]
        lines.append(json.dumps({
            "id": instance_key(comp.id),
            "rule": comp.rule_id,
            "location": comp.location,
            "inputs": [instance_key(i) for i in comp.inputs],
            "output": instance_key(comp.output),
            "value": None if v is UNDEFINED else V.render_value(v),
            "seq": comp.seq,
        }, sort_keys=True))
    return "\n".join(lines) + "\n"
