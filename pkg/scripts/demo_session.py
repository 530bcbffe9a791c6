#!/usr/bin/env python3
"""Walk the bundled G1 bug end to end and print everything the debugger
sees: the attributed tree, the query/answer transcript, and the report."""

from agdebug.cli import asset_path
from agdebug.evaluator import evaluate
from agdebug.grammar import parse_grammar
from agdebug.sentence import parse_sentence, tokenize
from agdebug.session import ReferenceOracle, run_session
from agdebug.values import render_value


def main():
    buggy = parse_grammar(open(asset_path("g1_buggy.ag")).read())
    fixed = parse_grammar(open(asset_path("g1_fixed.ag")).read())
    at = evaluate(buggy, parse_sentence(buggy, tokenize(buggy, ".101")))
    print('attributed tree for ".101" under the buggy grammar:')
    for node in at.tree.root.walk():
        if node.terminal:
            continue
        vals = ", ".join(f"{i[1]}={render_value(at.value(i))}"
                         for i in at.inherited_instances(node.id)
                         + at.synthesized_instances(node.id))
        print(f"  node {node.id} {node.symbol}: {vals}")

    for strategy in ("ad", "slice", "gad"):
        out = run_session(buggy, ".101", strategy, ReferenceOracle(fixed))
        print(f"\nstrategy {strategy}: {out.report.queries_asked} queries, "
              f"{len(out.report.rules)} candidate rule(s)")
        for e in out.transcript:
            print(f"  {e['form']['kind']:<7} -> {e['answer']}")
        for rule_id, span in out.report.rules:
            print(f"  candidate: {rule_id}  [line {span.line}]")


if __name__ == "__main__":
    main()
