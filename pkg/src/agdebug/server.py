"""HTTP+JSON session service for the browser UI.

The server is a thin adapter over the session machinery: it evaluates the
posted grammar/input, opens a debugging session whose first query is the
root relation (the human is the symptom judge), and advances it one answer
at a time.  Sessions persist as write-ahead transcripts; on restart a
session is rebuilt by replaying its transcript, so the transcript is the
single source of truth.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Query as QueryParam
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import gad as G
from .evaluator import (AttributedTree, CircularityError, evaluate,
                        instance_key, parse_instance_key)
from .gad import Abort, BugReport, Correct, GadState, Query, Skip, Wrong, WrongValue
from .grammar import GrammarError, parse_grammar, validate_against, SameShape
from .sentence import (AmbiguityError, LexError, ParseError, parse_sentence,
                       tokenize)
from .session import ReferenceOracle, _event_with_slice, decode_answer
from .values import UNDEFINED, diff_values, render_value, value_sort

SCHEMA_VERSION = "1"


class CreateSession(BaseModel):
    grammar: str
    input: str
    strategy: str = "gad"
    epsilon: int = 1
    reference: str | None = None


class AnswerBody(BaseModel):
    answer: str  # correct | wrong | skip | abort
    fingerprint: str | None = None


class VolunteerBody(BaseModel):
    instance: str


@dataclass
class Session:
    id: str
    grammar_src: str
    input: str
    strategy: str
    epsilon: int
    at: AttributedTree
    state: GadState
    pending: Query | None
    report: BugReport | None
    events: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _problem(status: int, detail: str, **extra):
    raise HTTPException(status_code=status,
                        detail={"message": detail, **extra})


def _value_wire(v):
    if v is UNDEFINED:
        return None
    return {"sort": value_sort(v), "text": render_value(v)}


def _span_wire(span):
    return {"line": span.line, "col": span.col,
            "end_line": span.end_line, "end_col": span.end_col}


def _tree_wire(at: AttributedTree, node_id: int, pruned=frozenset()):
    node = at.tree.node(node_id)
    if node.terminal:
        return {"id": node.id, "symbol": node.symbol, "terminal": True}
    syn = [{"instance": instance_key(i), "attr": i[1],
            "value": _value_wire(at.value(i))}
           for i in at.synthesized_instances(node.id)]
    inh = [{"instance": instance_key(i), "attr": i[1],
            "value": _value_wire(at.value(i))}
           for i in at.inherited_instances(node.id)]
    if node.id in pruned:
        return {"id": node.id, "symbol": node.symbol, "terminal": False,
                "stub": True, "synthesized": syn, "inherited": inh}
    return {
        "id": node.id, "symbol": node.symbol, "terminal": False,
        "production": node.production,
        "inherited": inh, "synthesized": syn,
        "children": [_tree_wire(at, c.id, pruned) for c in node.children],
    }


def _query_wire(q: Query, at: AttributedTree):
    form = q.form
    if isinstance(form, G.SynthForm):
        fw = {"kind": "synth", "node": form.node}
        display = _tree_wire(at, form.node)
    elif isinstance(form, G.RegionForm):
        fw = {"kind": "region", "root": form.root,
              "pruned": sorted(form.pruned)}
        display = _tree_wire(at, form.root, form.pruned)
    else:
        fw = {"kind": "slice", "target": instance_key(form.target)}
        display = None
    boundary = lambda pairs: [
        {"instance": instance_key(i),
         "node": i[0], "attr": i[1],
         "symbol": at.tree.node(i[0]).symbol,
         "value": _value_wire(v)} for i, v in pairs]
    return {
        "fingerprint": q.fingerprint,
        "form": fw,
        "premise": boundary(q.premise),
        "conclusion": boundary(q.conclusion),
        "symptom_check": q.symptom_check,
        "display_tree": display,
    }


def _report_wire(r: BugReport):
    return {
        "candidates": sorted(instance_key(c) for c in r.candidates),
        "rules": [{"id": rid, "span": _span_wire(span)}
                  for rid, span in r.rules],
        "queries_asked": r.queries_asked,
        "terminated_by": r.terminated_by,
    }


def _session_wire(s: Session):
    from .compmodel import Subtree

    judged_correct = sorted({c.origin.node for c in s.state.correct
                             if isinstance(c.origin, Subtree)})
    return {
        "id": s.id,
        "status": "done" if s.report is not None else "awaiting_answer",
        "strategy": s.strategy,
        "epsilon": s.epsilon,
        "input": s.input,
        "correct_subtrees": judged_correct,
        "grammar": {
            "source": s.grammar_src,
            "rules": [{"id": r.id, "span": _span_wire(r.span)}
                      for r in s.at.grammar.rules],
        },
        "evaluation": {
            "status": s.at.status,
            "fault": None if s.at.fault is None else {
                "comp": instance_key(s.at.fault.comp),
                "kind": s.at.fault.kind,
                "message": s.at.fault.message,
            },
        },
        "tree": _tree_wire(s.at, s.at.tree.root.id),
        "pending_query": None if s.pending is None
        else _query_wire(s.pending, s.at),
        "report": None if s.report is None else _report_wire(s.report),
        "queries_asked": G._queries_asked(s.state.history),
    }


def create_app(state_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="agdebug", version=SCHEMA_VERSION)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[os.environ.get("AGDEBUG_UI_ORIGIN", "*")],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, Session] = {}

    def _persist(s: Session, event: dict):
        s.events.append(event)
        if state_dir:
            os.makedirs(state_dir, exist_ok=True)
            with open(os.path.join(state_dir, f"{s.id}.jsonl"), "a") as f:
                f.write(json.dumps(event, sort_keys=True) + "\n")

    def _persist_meta(s: Session, interactive: bool):
        if state_dir:
            os.makedirs(state_dir, exist_ok=True)
            meta = {"grammar": s.grammar_src, "input": s.input,
                    "strategy": s.strategy, "epsilon": s.epsilon,
                    "interactive": interactive}
            with open(os.path.join(state_dir, f"{s.id}.meta.json"), "w") as f:
                json.dump(meta, f, sort_keys=True)

    def _advance(s: Session):
        """Run gad_step and stash either the pending query or the report."""
        step = G.gad_step(s.state)
        if isinstance(step, BugReport):
            s.pending, s.report = None, step
        else:
            s.pending, s.report = step, None

    def _open_session(grammar_src, input_text, strategy, epsilon,
                      interactive=True, sid=None) -> Session:
        try:
            g = parse_grammar(grammar_src)
        except GrammarError as e:
            _problem(400, str(e), span=None if e.span is None
                     else _span_wire(e.span))
        try:
            tree = parse_sentence(g, tokenize(g, input_text))
            at = evaluate(g, tree)
        except (LexError, ParseError, AmbiguityError, CircularityError) as e:
            _problem(400, str(e))
        if strategy not in G.STRATEGIES:
            _problem(400, f"unknown strategy {strategy!r}")
        state = G.gad_init(at, strategy, epsilon)
        s = Session(sid or secrets.token_hex(8), grammar_src, input_text,
                    strategy, epsilon, at, state, None, None)
        # Interactive sessions open on the root relation (the human is the
        # symptom judge); reference-driven ones check the symptom
        # internally.  Failed traces skip the root query either way: it
        # would mention undefined attributes.
        if interactive and at.status == "completed":
            bug_rules = G._rules_of(state, G.bug_acs(state))
            if len(bug_rules) > epsilon:
                s.pending = G.make_query(state, state.suspect, perm=(), m=0,
                                         symptom_check=True)
            else:
                _advance(s)
        else:
            _advance(s)
        return s

    def _apply(s: Session, answer, record=True):
        q = s.pending
        event = _event_with_slice(q, answer, s.at)
        if record:
            _persist(s, event)
        s.state = G.apply_answer(s.state, q, answer)
        _advance(s)

    def _restore(sid: str) -> Session | None:
        if not state_dir:
            return None
        meta_path = os.path.join(state_dir, f"{sid}.meta.json")
        if not os.path.exists(meta_path):
            return None
        with open(meta_path) as f:
            meta = json.load(f)
        s = _open_session(meta["grammar"], meta["input"], meta["strategy"],
                          meta["epsilon"],
                          interactive=meta.get("interactive", True), sid=sid)
        log_path = os.path.join(state_dir, f"{sid}.jsonl")
        if os.path.exists(log_path):
            with open(log_path) as f:
                for line in f:
                    if not line.strip():
                        continue
                    event = json.loads(line)
                    s.events.append(event)
                    if s.pending is None or \
                            s.pending.fingerprint != event["fingerprint"]:
                        _problem(500, "transcript does not replay")
                    s.state = G.apply_answer(s.state, s.pending,
                                             decode_answer(event["answer"]))
                    _advance(s)
        sessions[sid] = s
        return s

    def _get(sid: str) -> Session:
        s = sessions.get(sid) or _restore(sid)
        if s is None:
            _problem(404, f"no session {sid}")
        return s

    @app.post("/sessions", status_code=201)
    def create(body: CreateSession):
        interactive = body.reference is None
        s = _open_session(body.grammar, body.input, body.strategy,
                          body.epsilon, interactive=interactive)
        if body.reference is not None:
            try:
                intended = parse_grammar(body.reference)
            except GrammarError as e:
                _problem(400, f"reference grammar: {e}")
            if not isinstance(validate_against(s.at.grammar, intended),
                              SameShape):
                _problem(400, "reference grammar shape mismatch")
            oracle = ReferenceOracle(intended)
            from .session import _has_symptom
            if not _has_symptom(s.at.grammar, intended, s.at, s.at.tree):
                _problem(422, "nothing to debug: root outputs match the "
                              "reference grammar")
            guard = 0
            while s.pending is not None:
                a = oracle.answer(s.pending, s.at,
                                  s.state.suspect.comp_ids)
                _apply(s, a)
                guard += 1
                if guard > len(s.at.comps) + 2:
                    _problem(500, "session did not terminate")
        sessions[s.id] = s
        _persist_meta(s, interactive)
        return _session_wire(s)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return _session_wire(_get(sid))

    @app.post("/sessions/{sid}/answer")
    def answer(sid: str, body: AnswerBody):
        s = _get(sid)
        with s.lock:
            if s.pending is None:
                _problem(409, "session has no pending query")
            if body.fingerprint and body.fingerprint != s.pending.fingerprint:
                _problem(409, "stale query fingerprint")
            if body.answer == "correct":
                a = Correct()
            elif body.answer == "wrong":
                a = Wrong()
            elif body.answer == "skip":
                a = Skip()
            elif body.answer == "abort":
                a = Abort()
            else:
                _problem(400, f"unknown answer {body.answer!r}")
            _apply(s, a)
            return _session_wire(s)

    @app.post("/sessions/{sid}/volunteer")
    def volunteer(sid: str, body: VolunteerBody):
        s = _get(sid)
        with s.lock:
            if s.pending is None:
                _problem(409, "session has no pending query")
            try:
                inst = parse_instance_key(body.instance)
            except ValueError:
                _problem(400, f"malformed instance {body.instance!r}")
            if inst not in s.at.values:
                _problem(404, f"no instance {body.instance}")
            if not s.at.defined(inst):
                _problem(400, f"instance {body.instance} is undefined")
            _apply(s, WrongValue(inst))
            return _session_wire(s)

    @app.get("/sessions/{sid}/diff")
    def diff(sid: str, a: str = QueryParam(...), b: str = QueryParam(...)):
        s = _get(sid)
        try:
            ia, ib = parse_instance_key(a), parse_instance_key(b)
            va, vb = s.at.values[ia], s.at.values[ib]
        except (ValueError, KeyError):
            _problem(404, "no such instance")
        if va is UNDEFINED or vb is UNDEFINED:
            _problem(400, "cannot diff undefined values")
        report = diff_values(va, vb)
        return {
            "a": {"instance": a, "value": _value_wire(va)},
            "b": {"instance": b, "value": _value_wire(vb)},
            "equal": report.empty,
            "edits": [{"path": e.path, "kind": e.kind, "a": e.a, "b": e.b}
                      for e in report.edits],
        }

    @app.get("/schema")
    def schema():
        return SCHEMAS

    @app.exception_handler(HTTPException)
    async def on_http_error(request, exc):
        detail = exc.detail if isinstance(exc.detail, dict) \
            else {"message": str(exc.detail)}
        return JSONResponse(status_code=exc.status_code,
                            content={"error": detail})

    return app


_VALUE_SCHEMA = {
    "oneOf": [
        {"type": "null"},
        {"type": "object",
         "properties": {"sort": {"type": "string"},
                        "text": {"type": "string"}},
         "required": ["sort", "text"]},
    ]
}

_BOUNDARY_ITEM = {
    "type": "object",
    "properties": {
        "instance": {"type": "string"},
        "node": {"type": "integer"},
        "attr": {"type": "string"},
        "symbol": {"type": "string"},
        "value": _VALUE_SCHEMA,
    },
    "required": ["instance", "node", "attr", "symbol", "value"],
}

_SPAN_SCHEMA = {
    "type": "object",
    "properties": {"line": {"type": "integer"}, "col": {"type": "integer"},
                   "end_line": {"type": "integer"},
                   "end_col": {"type": "integer"}},
    "required": ["line", "col", "end_line", "end_col"],
}

_QUERY_SCHEMA = {
    "type": "object",
    "properties": {
        "fingerprint": {"type": "string"},
        "form": {"type": "object",
                 "properties": {"kind": {"enum": ["synth", "region",
                                                  "slice"]}},
                 "required": ["kind"]},
        "premise": {"type": "array", "items": _BOUNDARY_ITEM},
        "conclusion": {"type": "array", "items": _BOUNDARY_ITEM},
        "symptom_check": {"type": "boolean"},
    },
    "required": ["fingerprint", "form", "premise", "conclusion"],
}

_REPORT_SCHEMA = {
    "type": "object",
    "properties": {
        "candidates": {"type": "array", "items": {"type": "string"}},
        "rules": {"type": "array",
                  "items": {"type": "object",
                            "properties": {"id": {"type": "string"},
                                           "span": _SPAN_SCHEMA},
                            "required": ["id", "span"]}},
        "queries_asked": {"type": "integer"},
        "terminated_by": {"enum": ["epsilon", "no-admissible-query",
                                   "abort"]},
    },
    "required": ["candidates", "rules", "queries_asked", "terminated_by"],
}

_SESSION_SCHEMA = {
    "type": "object",
    "properties": {
        "id": {"type": "string"},
        "status": {"enum": ["awaiting_answer", "done"]},
        "strategy": {"type": "string"},
        "epsilon": {"type": "integer"},
        "input": {"type": "string"},
        "grammar": {"type": "object"},
        "evaluation": {"type": "object"},
        "tree": {"type": "object"},
        "pending_query": {"oneOf": [{"type": "null"}, _QUERY_SCHEMA]},
        "report": {"oneOf": [{"type": "null"}, _REPORT_SCHEMA]},
        "queries_asked": {"type": "integer"},
        "correct_subtrees": {"type": "array", "items": {"type": "integer"}},
    },
    "required": ["id", "status", "tree", "pending_query", "report",
                 "correct_subtrees"],
}

_DIFF_SCHEMA = {
    "type": "object",
    "properties": {
        "equal": {"type": "boolean"},
        "edits": {"type": "array",
                  "items": {"type": "object",
                            "properties": {
                                "path": {"type": "string"},
                                "kind": {"enum": ["added", "removed",
                                                  "changed"]},
                            },
                            "required": ["path", "kind"]}},
    },
    "required": ["equal", "edits"],
}

SCHEMAS = {
    "version": SCHEMA_VERSION,
    "session": _SESSION_SCHEMA,
    "query": _QUERY_SCHEMA,
    "report": _REPORT_SCHEMA,
    "diff": _DIFF_SCHEMA,
    "value": _VALUE_SCHEMA,
}
