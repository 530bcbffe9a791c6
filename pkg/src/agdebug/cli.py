"""Command-line entry point.

Subcommands: eval, debug, mutate, bench, serve.  Exit codes are stable for
scripting: 0 success, 1 usage/parse errors, 2 evaluation ended in a runtime
fault, 3 debugging aborted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

from . import mutate as M
from .evaluator import (CircularityError, count_instances, dump_trace,
                        evaluate, instance_key)
from .grammar import GrammarError, parse_grammar, render_grammar
from .sentence import (AmbiguityError, FormatError, LexError, ParseError,
                       load_tree, parse_sentence, tokenize)
from .session import (AdUnavailableError, InteractiveOracle, NothingToDebug,
                      ReferenceOracle, ScriptedOracle, ShapeMismatchError,
                      load_transcript, run_session)
from .values import UNDEFINED, render_value

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAULT = 2
EXIT_ABORT = 3


def asset_path(name: str) -> str:
    return str(resources.files("agdebug").joinpath("assets", name))


def _load_grammar(path: str):
    with open(path) as f:
        return parse_grammar(f.read())


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _input_text(args) -> str:
    if getattr(args, "input_file", None):
        with open(args.input_file) as f:
            return f.read().strip("\n")
    return args.input


def _build_tree(g, args):
    if args.tree:
        with open(args.tree) as f:
            return load_tree(g, f.read())
    return parse_sentence(g, tokenize(g, _input_text(args)))


def cmd_eval(args) -> int:
    try:
        g = _load_grammar(args.grammar)
        tree = _build_tree(g, args)
        at = evaluate(g, tree)
    except (GrammarError, LexError, ParseError, AmbiguityError, FormatError,
            CircularityError, OSError) as e:
        return _fail(str(e))

    if args.dump_trace:
        with open(args.dump_trace, "w") as f:
            f.write(dump_trace(at))

    if args.json:
        attrs, nodes = count_instances(at)
        print(json.dumps({
            "status": at.status,
            "attrs": attrs,
            "nodes": nodes,
            "values": {instance_key(i): None if not at.defined(i)
                       else render_value(at.value(i))
                       for i in sorted(at.instances)},
            "fault": None if at.fault is None else {
                "comp": instance_key(at.fault.comp),
                "kind": at.fault.kind,
                "message": at.fault.message,
            },
        }, sort_keys=True))
    else:
        for node in at.tree.root.walk():
            if node.terminal:
                continue
            vals = ", ".join(
                f"{i[1]} = {render_value(at.value(i))}"
                for i in at.inherited_instances(node.id)
                + at.synthesized_instances(node.id))
            print(f"node {node.id} {node.symbol}: {vals}")
        if at.fault is not None:
            comp = at.comps[at.fault.comp]
            print(f"fault: {at.fault.kind} in rule {comp.rule_id}: "
                  f"{at.fault.message}")
        for inst in at.root_synthesized():
            v = at.value(inst)
            shown = "undefined" if v is UNDEFINED else render_value(v)
            print(f"{at.tree.root.symbol}.{inst[1]} = {shown}")
    return EXIT_OK if at.status == "completed" else EXIT_FAULT


def _make_oracle(spec: str):
    if spec == "interactive":
        return InteractiveOracle()
    if spec.startswith("scripted:"):
        events = load_transcript(spec.split(":", 1)[1])
        return ScriptedOracle.from_events(events)
    if spec.startswith("reference:"):
        return ReferenceOracle(_load_grammar(spec.split(":", 1)[1]))
    raise ValueError(f"unknown oracle {spec!r} "
                     "(use interactive, scripted:FILE, or reference:GRAMMAR)")


def cmd_debug(args) -> int:
    try:
        g = _load_grammar(args.grammar)
        oracle = _make_oracle(args.oracle)
        out = run_session(g, _input_text(args), args.strategy, oracle,
                          epsilon=args.epsilon,
                          transcript_path=args.transcript)
    except NothingToDebug as e:
        return _fail(f"nothing to debug: {e}")
    except AdUnavailableError as e:
        return _fail(str(e))
    except (GrammarError, LexError, ParseError, AmbiguityError,
            ShapeMismatchError, ValueError, OSError) as e:
        return _fail(str(e))

    report = out.report
    if args.json:
        print(json.dumps({
            "rules": [{"id": r, "span": {"line": s.line, "col": s.col,
                                         "end_line": s.end_line,
                                         "end_col": s.end_col}}
                      for r, s in report.rules],
            "candidates": sorted(instance_key(c) for c in report.candidates),
            "queries_asked": report.queries_asked,
            "terminated_by": report.terminated_by,
            "metrics": out.metrics | {"wall_time": None},
        }, sort_keys=True))
    else:
        if report.terminated_by == "abort":
            print("debugging aborted")
        else:
            n = len(report.rules)
            print(f"{n} candidate rule(s) after {report.queries_asked} "
                  f"queries ({report.terminated_by}):")
            for rule_id, span in report.rules:
                print(f"  {rule_id}   [line {span.line}, col {span.col}]")
    return EXIT_ABORT if report.terminated_by == "abort" else EXIT_OK


def cmd_mutate(args) -> int:
    try:
        g = _load_grammar(args.grammar)
        mutant, mut = M.mutate_grammar(g, args.seed)
    except (GrammarError, M.NoMutationSite, OSError) as e:
        return _fail(str(e))
    os.makedirs(args.out, exist_ok=True)
    base = os.path.splitext(os.path.basename(args.grammar))[0]
    mutant_path = os.path.join(args.out, f"{base}.mutant{args.seed}.ag")
    manifest_path = os.path.join(args.out, f"{base}.mutant{args.seed}.json")
    with open(mutant_path, "w") as f:
        f.write(render_grammar(mutant))
    with open(manifest_path, "w") as f:
        json.dump({"rule": mut.rule_id, "operator": mut.operator,
                   "detail": mut.detail, "seed": args.seed,
                   "grammar": args.grammar}, f, sort_keys=True, indent=2)
    print(f"wrote {mutant_path}")
    print(f"mutated rule: {mut.rule_id} ({mut.operator} {mut.detail})")
    return EXIT_OK


BUNDLED_CORPUS = {
    "g1": ("g1_fixed.ag", [".01", ".101", ".0110", ".1", ".0"]),
    "minisem": ("minisem_fixed.ag", [
        "1", "x", "x + 1", "let x = 1 in x end",
        "let x = 1 in x + y end", "y + z",
        "let x = 1 in let x = x in x - 2 end end",
        "( 1 + 2 ) - z", "let z = y in z - ( x + 1 ) end",
        "let y = 0 in ( y + y ) - x end",
    ]),
}


def load_corpus(names):
    corpus = []
    for name in names:
        asset, inputs = BUNDLED_CORPUS[name]
        corpus.append((name, _load_grammar(asset_path(asset)), inputs))
    return corpus


def cmd_bench(args) -> int:
    names = list(BUNDLED_CORPUS) if args.corpus == "all" else [args.corpus]
    if any(n not in BUNDLED_CORPUS for n in names):
        return _fail(f"unknown corpus {args.corpus!r}")
    report = M.bench(load_corpus(names), trials=args.trials,
                     epsilon=args.epsilon, jobs=args.jobs, seed0=args.seed)
    print(report.text(), end="")
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(report.csv())
    if args.json:
        rows = [{"mutant": r.mutant, "rule": r.rule_id,
                 "operator": r.operator, "input": r.input,
                 "attrs": r.attrs, "nodes": r.nodes, "cells": r.cells}
                for r in report.rows]
        with open(args.json, "w") as f:
            json.dump({"rows": rows, "skipped": list(report.skipped)}, f,
                      sort_keys=True, indent=2)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(state_dir=args.state_dir)
    config = uvicorn.Config(app, host=args.host, port=args.port,
                            log_level="warning")
    server = uvicorn.Server(config)

    import threading

    started = threading.Event()
    orig = server.startup

    async def startup(**kw):
        await orig(**kw)
        started.set()

    server.startup = startup
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    started.wait(timeout=10)
    ports = [s.getsockname()[1] for s in server.servers[0].sockets]
    print(f"serving on http://{args.host}:{ports[0]}", flush=True)
    try:
        thread.join()
    except KeyboardInterrupt:
        server.should_exit = True
        thread.join(timeout=5)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="agdebug",
        description="Evaluate attribute grammars and localize buggy "
                    "semantic rules through systematic debugging.")
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("eval", help="evaluate a sentence and print values")
    pe.add_argument("grammar")
    pe.add_argument("input", nargs="?", default="")
    pe.add_argument("--input-file", help="read the sentence from a file")
    pe.add_argument("--tree", help="load a serialized parse tree instead")
    pe.add_argument("--dump-trace", metavar="PATH",
                    help="write the JSONL computation trace")
    pe.add_argument("--json", action="store_true")
    pe.set_defaults(fn=cmd_eval)

    pd = sub.add_parser("debug", help="run a debugging session")
    pd.add_argument("grammar")
    pd.add_argument("input", nargs="?", default="")
    pd.add_argument("--input-file", help="read the sentence from a file")
    pd.add_argument("--strategy", choices=("ad", "slice", "gad"),
                    default="gad")
    pd.add_argument("--oracle", default="interactive",
                    help="interactive | scripted:FILE | reference:GRAMMAR")
    pd.add_argument("--epsilon", type=int, default=1)
    pd.add_argument("--transcript", metavar="FILE",
                    help="record the session log")
    pd.add_argument("--json", action="store_true")
    pd.set_defaults(fn=cmd_debug)

    pm = sub.add_parser("mutate", help="write a single-rule mutant")
    pm.add_argument("grammar")
    pm.add_argument("--seed", type=int, required=True)
    pm.add_argument("--out", default=".")
    pm.set_defaults(fn=cmd_mutate)

    pb = sub.add_parser("bench",
                        help="query-count table over seeded mutants")
    pb.add_argument("--corpus", default="all",
                    choices=("all", *BUNDLED_CORPUS))
    pb.add_argument("--trials", type=int, default=40)
    pb.add_argument("--epsilon", type=int, default=1)
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--jobs", type=int, default=1)
    pb.add_argument("--csv", metavar="PATH")
    pb.add_argument("--json", metavar="PATH")
    pb.set_defaults(fn=cmd_bench)

    ps = sub.add_parser("serve", help="run the HTTP session service")
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--port", type=int,
                    default=int(os.environ.get("AGDEBUG_PORT", "8750")))
    ps.add_argument("--state-dir", default=None,
                    help="directory for session transcripts")
    ps.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
