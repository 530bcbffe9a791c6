"""Computation trees and attribute-computation compositions (ACCs).

An ACC is a set of computation instances with an explicit boundary: the
`premise` instances are external inputs read by members, the `outputs` are
the member results a query judges.  ACC identity is the comp-id set; set
algebra over ACCs is exact, boundaries are derived when a query is posed.

Four constructors cover the query forms the debugger uses:
  * subtree_acc  - everything computed at or below one tree node
                   (the synth-function form of classic algorithmic debugging)
  * region_acc   - a subtree with some inner subtrees pruned away
                   (the incomplete-subtree form)
  * slice_acc    - the dynamic backward slice of one attribute instance
  * acc_difference / setop_acc - exact set algebra for the engine
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .evaluator import AttributedTree, InstanceId, backward_closure, instance_key


class PartialTraceError(Exception):
    """Computation trees exist only for completed traces."""


class BoundaryUndefinedError(Exception):
    """The requested ACC would carry an undefined instance on its boundary."""

    def __init__(self, inst: InstanceId):
        super().__init__(f"instance {instance_key(inst)} is undefined")
        self.instance = inst


class RegionNestingError(Exception):
    """Pruned nodes must be strict, pairwise non-nested descendants of root."""


class UndefinedTargetError(Exception):
    def __init__(self, inst: InstanceId):
        super().__init__(f"cannot slice undefined instance {instance_key(inst)}")
        self.instance = inst


@dataclass(frozen=True)
class Subtree:
    node: int


@dataclass(frozen=True)
class Region:
    root: int
    pruned: frozenset[int]


@dataclass(frozen=True)
class Slice:
    target: InstanceId


@dataclass(frozen=True)
class SetOp:
    pass


@dataclass(frozen=True)
class Acc:
    comp_ids: frozenset[InstanceId]
    premise: frozenset[InstanceId]
    outputs: frozenset[InstanceId]
    origin: Subtree | Region | Slice | SetOp
    trace: AttributedTree = field(compare=False, repr=False)

    def __len__(self):
        return len(self.comp_ids)


@dataclass(frozen=True)
class CompTreeNode:
    """A synth-function triplet: (function, arguments, result).

    Arguments are the node's inherited attribute values plus its subtree;
    the result is its synthesized attribute values.
    """

    node: int
    function: str
    inherited: tuple[tuple[InstanceId, object], ...]
    synthesized: tuple[tuple[InstanceId, object], ...]
    children: tuple["CompTreeNode", ...]

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def build_comp_tree(at: AttributedTree) -> CompTreeNode:
    if at.status != "completed":
        raise PartialTraceError(
            "cannot build a computation tree over a failed trace; "
            "use slice or region queries instead")

    def build(node) -> CompTreeNode:
        kids = tuple(build(c) for c in node.children if not c.terminal)
        return CompTreeNode(
            node=node.id,
            function=f"synth_{node.symbol}",
            inherited=tuple((i, at.value(i))
                            for i in at.inherited_instances(node.id)),
            synthesized=tuple((i, at.value(i))
                              for i in at.synthesized_instances(node.id)),
            children=kids,
        )

    return build(at.tree.root)


def _check_defined(at: AttributedTree, boundary) -> None:
    for inst in boundary:
        if not at.defined(inst):
            raise BoundaryUndefinedError(inst)


def subtree_acc(at: AttributedTree, node: int) -> Acc:
    """All computations located at descendant-or-self nodes of `node`;
    premise = its inherited instances, outputs = its synthesized ones."""
    if at.tree.node(node).terminal:
        raise ValueError(f"node {node} is a terminal leaf")
    comp_ids = frozenset(
        cid
        for nid in at.subtree_node_ids(node)
        for cid in at.comps_located_at(nid)
    )
    premise = frozenset(at.inherited_instances(node))
    outputs = frozenset(at.synthesized_instances(node))
    _check_defined(at, premise | outputs)
    return Acc(comp_ids, premise, outputs, Subtree(node), at)


def region_acc(at: AttributedTree, root: int, pruned) -> Acc:
    """subtree_acc(root) minus the pruned subtrees; the pruned boundaries
    join the region's own: pruned synthesized values become premises (the
    region consumes them), pruned inherited values become outputs (the
    region computes them)."""
    pruned = frozenset(pruned)
    root_nodes = set(at.subtree_node_ids(root))
    for p in pruned:
        if p == root or p not in root_nodes:
            raise RegionNestingError(
                f"pruned node {p} is not a strict descendant of {root}")
    for p in pruned:
        inner = set(at.subtree_node_ids(p)) - {p}
        if inner & pruned:
            raise RegionNestingError("pruned nodes must be pairwise non-nested")

    base = subtree_acc(at, root)
    comp_ids = base.comp_ids
    premise = set(base.premise)
    outputs = set(base.outputs)
    for p in pruned:
        sub = subtree_acc(at, p)
        comp_ids = comp_ids - sub.comp_ids
        premise |= frozenset(at.synthesized_instances(p))
        outputs |= frozenset(at.inherited_instances(p))
    _check_defined(at, premise | outputs)
    return Acc(comp_ids, frozenset(premise), frozenset(outputs),
               Region(root, pruned), at)


def slice_acc(at: AttributedTree, target: InstanceId) -> Acc:
    """Dynamic backward slice: every computation the target's value
    transitively depends on, back to the start of the evaluation."""
    if target not in at.values:
        raise KeyError(f"no instance {instance_key(target)}")
    if not at.defined(target):
        raise UndefinedTargetError(target)
    comp_ids = frozenset(i for i in backward_closure(at, target)
                         if i in at.comps)
    return Acc(comp_ids, frozenset(), frozenset({target}), Slice(target), at)


def setop_acc(at: AttributedTree, comp_ids) -> Acc:
    """An ACC over an arbitrary computation set.  The premise is derived by
    closure (member inputs produced outside); outputs are member results
    consumed outside the set or externally observable sinks.  May be empty
    or carry undefined sinks: set-algebra results are reported, not queried.
    """
    comp_ids = frozenset(comp_ids)
    produced = comp_ids
    premise = frozenset(
        src
        for cid in comp_ids
        for src in at.comps[cid].inputs
        if src not in produced
    )
    outputs = frozenset(
        cid for cid in comp_ids
        if any(c not in comp_ids for c in at.consumers.get(cid, ()))
        or not at.consumers.get(cid, ())
    )
    return Acc(comp_ids, premise, outputs, SetOp(), at)


def acc_difference(a: Acc, b_set) -> Acc:
    comp_ids = a.comp_ids
    for b in b_set:
        comp_ids = comp_ids - b.comp_ids
    return setop_acc(a.trace, comp_ids)


def acc_union(at: AttributedTree, accs) -> Acc:
    comp_ids: frozenset[InstanceId] = frozenset()
    for a in accs:
        comp_ids = comp_ids | a.comp_ids
    return setop_acc(at, comp_ids)


def acc_size(a: Acc, metric: str = "instances") -> int:
    if metric == "instances":
        return len(a.comp_ids)
    if metric == "rules":
        return len({a.trace.comps[cid].rule_id for cid in a.comp_ids})
    raise ValueError(f"unknown metric {metric!r}")


def acc_rules(a: Acc) -> frozenset[str]:
    return frozenset(a.trace.comps[cid].rule_id for cid in a.comp_ids)
