import json

from agdebug.cli import asset_path, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


G1_BUGGY = asset_path("g1_buggy.ag")
G1_FIXED = asset_path("g1_fixed.ag")
MINISEM = asset_path("minisem_fixed.ag")


def test_eval_buggy_prints_3_8(capsys):
    code, out, _ = run_cli(capsys, "eval", G1_BUGGY, ".101")
    assert code == 0
    assert out.strip().splitlines()[-1] == "F.val = 3/8"


def test_eval_fixed_prints_5_8(capsys):
    code, out, _ = run_cli(capsys, "eval", G1_FIXED, ".101")
    assert code == 0
    assert out.strip().splitlines()[-1] == "F.val = 5/8"


def test_eval_lex_error_exit_1(capsys):
    code, _, err = run_cli(capsys, "eval", G1_BUGGY, ".2")
    assert code == 1
    assert "offset 1" in err


def test_eval_failed_trace_exit_2(capsys, tmp_path):
    src = open(G1_BUGGY).read().replace("B.val = pow2(-B.pos);",
                                        "B.val = 1 / (B.pos - B.pos);")
    path = tmp_path / "div.ag"
    path.write_text(src)
    code, out, _ = run_cli(capsys, "eval", str(path), ".1")
    assert code == 2
    assert "fault: div_zero" in out
    assert "F.val = undefined" in out


def test_eval_json_and_trace_dump(capsys, tmp_path):
    trace = tmp_path / "trace.jsonl"
    code, out, _ = run_cli(capsys, "eval", G1_BUGGY, ".101",
                           "--json", "--dump-trace", str(trace))
    assert code == 0
    data = json.loads(out)
    assert data["values"]["0.val"] == "3/8"
    assert data["attrs"] == 13 and data["nodes"] == 11
    lines = trace.read_text().strip().splitlines()
    assert len(lines) == 14  # header + 13 computations
    assert json.loads(lines[0])["status"] == "completed"


def test_eval_tree_input(capsys, tmp_path):
    from agdebug.grammar import parse_grammar
    from agdebug.sentence import parse_sentence, serialize_tree, tokenize

    g = parse_grammar(open(G1_BUGGY).read())
    t = parse_sentence(g, tokenize(g, ".101"))
    path = tmp_path / "tree.sexp"
    path.write_text(serialize_tree(t))
    code, out, _ = run_cli(capsys, "eval", G1_BUGGY, "--tree", str(path))
    assert code == 0
    assert out.strip().splitlines()[-1] == "F.val = 3/8"


def test_debug_gad_reference(capsys):
    code, out, _ = run_cli(capsys, "debug", G1_BUGGY, ".101",
                           "--strategy", "gad",
                           "--oracle", f"reference:{G1_FIXED}",
                           "--epsilon", "1")
    assert code == 0
    assert "1 candidate rule(s)" in out
    assert "L ::= B L1 / B.pos" in out
    assert "line 27" in out


def test_debug_ad_reference(capsys):
    code, out, _ = run_cli(capsys, "debug", G1_BUGGY, ".101",
                           "--strategy", "ad",
                           "--oracle", f"reference:{G1_FIXED}")
    assert code == 0
    assert "L ::= B L1 / B.pos" in out


def test_debug_scripted_exhaustion_exit_3(capsys, tmp_path):
    empty = tmp_path / "empty.log"
    empty.write_text("")
    code, out, _ = run_cli(capsys, "debug", G1_BUGGY, ".101",
                           "--oracle", f"scripted:{empty}")
    assert code == 3
    assert "aborted" in out


def test_debug_transcript_roundtrip(capsys, tmp_path):
    log = tmp_path / "session.jsonl"
    code, out, _ = run_cli(capsys, "debug", G1_BUGGY, ".101",
                           "--oracle", f"reference:{G1_FIXED}",
                           "--transcript", str(log), "--json")
    assert code == 0
    first = json.loads(out)
    code, out, _ = run_cli(capsys, "debug", G1_BUGGY, ".101",
                           "--oracle", f"scripted:{log}", "--json")
    assert code == 0
    assert json.loads(out)["rules"] == first["rules"]


def test_debug_nothing_to_debug(capsys):
    code, _, err = run_cli(capsys, "debug", G1_FIXED, ".101",
                           "--oracle", f"reference:{G1_FIXED}")
    assert code == 1
    assert "nothing to debug" in err


def test_mutate_writes_mutant_and_manifest(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "mutate", G1_FIXED, "--seed", "23",
                           "--out", str(tmp_path))
    assert code == 0
    manifest = json.loads((tmp_path / "g1_fixed.mutant23.json").read_text())
    assert manifest["rule"] == "L ::= B L1 / B.pos"
    mutant_src = (tmp_path / "g1_fixed.mutant23.ag").read_text()
    from agdebug.grammar import parse_grammar
    assert parse_grammar(mutant_src)  # parses clean


def test_mutate_deterministic(capsys, tmp_path):
    run_cli(capsys, "mutate", MINISEM, "--seed", "5", "--out",
            str(tmp_path / "a"))
    run_cli(capsys, "mutate", MINISEM, "--seed", "5", "--out",
            str(tmp_path / "b"))
    a = (tmp_path / "a" / "minisem_fixed.mutant5.ag").read_text()
    b = (tmp_path / "b" / "minisem_fixed.mutant5.ag").read_text()
    assert a == b


def test_bench_cli_table(capsys, tmp_path):
    csv = tmp_path / "bench.csv"
    code, out, _ = run_cli(capsys, "bench", "--corpus", "g1",
                           "--trials", "6", "--csv", str(csv))
    assert code == 0
    header = out.splitlines()[0].split()
    assert header == ["mutant", "#attrs", "#nds", "Slice", "AD", "GAD"]
    assert csv.read_text().startswith("mutant,")


def test_eval_input_file(capsys, tmp_path):
    f = tmp_path / "sentence.txt"
    f.write_text(".101\n")
    code, out, _ = run_cli(capsys, "eval", G1_BUGGY, "--input-file", str(f))
    assert code == 0
    assert out.strip().splitlines()[-1] == "F.val = 3/8"


def test_serve_prints_ephemeral_port():
    import re
    import subprocess
    import sys

    proc = subprocess.Popen(
        [sys.executable, "-m", "agdebug", "serve", "--port", "0"],
        stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True)
    try:
        line = proc.stdout.readline()
        m = re.match(r"serving on http://127\.0\.0\.1:(\d+)", line)
        assert m, line
        assert int(m.group(1)) > 0
        import urllib.request
        with urllib.request.urlopen(
                f"http://127.0.0.1:{m.group(1)}/schema", timeout=5) as r:
            assert r.status == 200
    finally:
        proc.terminate()
        proc.wait(timeout=10)
