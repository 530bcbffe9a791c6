import json

import jsonschema
import pytest
from fastapi.testclient import TestClient

from agdebug.server import SCHEMAS, create_app
from conftest import load_asset


@pytest.fixture()
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def g1_buggy_src():
    return load_asset("g1_buggy.ag")


@pytest.fixture(scope="module")
def g1_fixed_src():
    return load_asset("g1_fixed.ag")


def validate(kind, payload):
    jsonschema.validate(payload, SCHEMAS[kind])


def test_create_returns_root_query(client, g1_buggy_src):
    r = client.post("/sessions", json={"grammar": g1_buggy_src,
                                       "input": ".101", "strategy": "gad"})
    assert r.status_code == 201
    s = r.json()
    validate("session", s)
    q = s["pending_query"]
    assert q["symptom_check"] is True
    assert q["form"]["kind"] == "synth"
    conclusion = {c["instance"]: c["value"]["text"] for c in q["conclusion"]}
    assert conclusion == {"0.val": "3/8"}


def test_malformed_grammar_400_with_span(client):
    r = client.post("/sessions", json={"grammar": "grammar x;", "input": ""})
    assert r.status_code == 400
    assert "error" in r.json()


def test_epsilon_999_immediate_report(client, g1_buggy_src):
    r = client.post("/sessions", json={"grammar": g1_buggy_src,
                                       "input": ".101", "epsilon": 999})
    assert r.status_code == 201
    s = r.json()
    validate("session", s)
    assert s["status"] == "done"
    assert len(s["report"]["rules"]) == 9
    assert s["report"]["terminated_by"] == "epsilon"


def test_truthful_session_reaches_paper_bug(client, g1_buggy_src):
    r = client.post("/sessions", json={"grammar": g1_buggy_src,
                                       "input": ".101"})
    s = r.json()
    sid = s["id"]
    answers = ["wrong", "correct", "wrong", "correct", "wrong", "correct"]
    saw_region_stub = False
    for a in answers:
        q = s["pending_query"]
        validate("query", q)
        if q["form"]["kind"] == "region":
            stubs = _stubs(q["display_tree"])
            values = [(x["attr"], x["value"]["text"])
                      for stub in stubs for x in stub["synthesized"]]
            assert ("val", "1/8") in values
            saw_region_stub = True
        r = client.post(f"/sessions/{sid}/answer",
                        json={"answer": a, "fingerprint": q["fingerprint"]})
        assert r.status_code == 200
        s = r.json()
        if s["status"] == "done":
            break
    assert saw_region_stub
    assert s["status"] == "done"
    validate("report", s["report"])
    assert [x["id"] for x in s["report"]["rules"]] == ["L ::= B L1 / B.pos"]
    span = s["report"]["rules"][0]["span"]
    assert span["line"] == 27


def _stubs(node):
    if node is None:
        return []
    out = [node] if node.get("stub") else []
    for c in node.get("children", []):
        out.extend(_stubs(c))
    return out


def test_volunteer_narrows_to_slice(client, g1_buggy_src):
    r = client.post("/sessions", json={"grammar": g1_buggy_src,
                                       "input": ".101"})
    sid = r.json()["id"]
    r = client.post(f"/sessions/{sid}/volunteer", json={"instance": "3.pos"})
    assert r.status_code == 200
    s = r.json()
    # suspect = 2-computation slice of the volunteered instance
    q = s["pending_query"]
    assert q["form"]["kind"] == "slice"
    assert q["form"]["target"] == "2.pos"


def test_answer_on_completed_session_409(client, g1_buggy_src,
                                         g1_fixed_src):
    r = client.post("/sessions", json={"grammar": g1_buggy_src,
                                       "input": ".101",
                                       "reference": g1_fixed_src})
    assert r.status_code == 201
    s = r.json()
    assert s["status"] == "done"
    r = client.post(f"/sessions/{s['id']}/answer", json={"answer": "correct"})
    assert r.status_code == 409


def test_stale_fingerprint_409(client, g1_buggy_src):
    r = client.post("/sessions", json={"grammar": g1_buggy_src,
                                       "input": ".101"})
    s = r.json()
    r = client.post(f"/sessions/{s['id']}/answer",
                    json={"answer": "wrong", "fingerprint": "bogus"})
    assert r.status_code == 409


def test_unknown_session_404(client):
    assert client.get("/sessions/xyzzy").status_code == 404
    assert client.post("/sessions/xyzzy/answer",
                       json={"answer": "wrong"}).status_code == 404


def test_reference_no_symptom_422(client, g1_fixed_src):
    r = client.post("/sessions", json={"grammar": g1_fixed_src,
                                       "input": ".101",
                                       "reference": g1_fixed_src})
    assert r.status_code == 422


def test_reference_session_matches_cli(client, g1_buggy_src, g1_fixed_src):
    r = client.post("/sessions", json={"grammar": g1_buggy_src,
                                       "input": ".101",
                                       "reference": g1_fixed_src})
    s = r.json()
    assert [x["id"] for x in s["report"]["rules"]] == ["L ::= B L1 / B.pos"]

    from agdebug.grammar import parse_grammar
    from agdebug.session import ReferenceOracle, run_session
    out = run_session(parse_grammar(g1_buggy_src), ".101", "gad",
                      ReferenceOracle(parse_grammar(g1_fixed_src)))
    assert [r for r, _ in out.report.rules] == \
        [x["id"] for x in s["report"]["rules"]]
    assert out.report.queries_asked == s["report"]["queries_asked"]


def test_diff_endpoint(client):
    minisem = load_asset("minisem_fixed.ag")
    r = client.post("/sessions", json={
        "grammar": minisem, "input": "let x = 1 in x + y end"})
    sid = r.json()["id"]
    tree = r.json()["tree"]

    def env_instances(node, out):
        for item in node.get("inherited", []):
            if item["attr"] == "env":
                out.append((item["instance"], item["value"]["text"]))
        for c in node.get("children", []):
            env_instances(c, out)
        return out

    envs = env_instances(tree, [])
    empty = next(i for i, v in envs if v == "{}")
    bound = next(i for i, v in envs if v != "{}")
    r = client.get(f"/sessions/{sid}/diff", params={"a": empty, "b": bound})
    assert r.status_code == 200
    d = r.json()
    validate("diff", d)
    assert not d["equal"]
    assert [(e["path"], e["kind"]) for e in d["edits"]] == [(".x", "added")]

    r = client.get(f"/sessions/{sid}/diff", params={"a": empty, "b": empty})
    assert r.json()["equal"]

    assert client.get(f"/sessions/{sid}/diff",
                      params={"a": "0.nope", "b": empty}).status_code == 404


def test_schema_endpoint(client):
    r = client.get("/schema")
    assert r.status_code == 200
    assert r.json()["version"] == "1"
    assert set(r.json()) >= {"session", "query", "report", "diff"}


def test_persistence_replays_across_restart(tmp_path, g1_buggy_src):
    state_dir = str(tmp_path / "state")
    app_a = create_app(state_dir=state_dir)
    with TestClient(app_a) as client_a:
        r = client_a.post("/sessions", json={"grammar": g1_buggy_src,
                                             "input": ".101"})
        sid = r.json()["id"]
        client_a.post(f"/sessions/{sid}/answer", json={"answer": "wrong"})
        client_a.post(f"/sessions/{sid}/answer", json={"answer": "correct"})
        snapshot = client_a.get(f"/sessions/{sid}").json()

    app_b = create_app(state_dir=state_dir)
    with TestClient(app_b) as client_b:
        restored = client_b.get(f"/sessions/{sid}").json()
        assert restored == snapshot
        # and the restored session still advances
        r = client_b.post(f"/sessions/{sid}/answer", json={"answer": "wrong"})
        assert r.status_code == 200
