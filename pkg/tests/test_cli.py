import json
import shutil
import subprocess
import sys

import pytest

import vcdpor.explorer as explorer
from vcdpor.cli import CORPUS, EXIT_ASSERT, EXIT_DIFF, EXIT_INPUT, EXIT_LIMIT, EXIT_OK, main

SCHEMA = [
    "benchmark",
    "algo",
    "root",
    "realized_traces",
    "maximal_traces",
    "classes",
    "states_digest",
    "assert_violations",
    "time_ms",
    "status",
]


def vp(name):
    return str(CORPUS / f"{name}.vp")


def run_json(capsys, *argv):
    code = main(list(argv) + ["--json"])
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_run_vcdpor_race(capsys):
    code, rep = run_json(capsys, "run", vp("fig1"), "--algo", "vcdpor")
    assert code == EXIT_OK
    assert list(rep) == SCHEMA
    assert rep["maximal_traces"] == 1
    assert rep["root"] == "p1"
    assert rep["status"] == "done"


def test_run_oracle_classes_race(capsys):
    code, rep = run_json(capsys, "run", vp("fig1"), "--algo", "oracle", "--classes", "hb,vhb")
    assert code == EXIT_OK
    assert rep["classes"] == {"hb": 4, "vhb": 1}
    assert rep["maximal_traces"] == 4


def test_engines_agree_on_digest(capsys):
    _, a = run_json(capsys, "run", vp("branchy"), "--algo", "oracle")
    _, b = run_json(capsys, "run", vp("branchy"), "--algo", "vcdpor")
    assert a["states_digest"] == b["states_digest"]


def test_table_on_stderr_with_json(capsys):
    main(["run", vp("fig1"), "--json"])
    cap = capsys.readouterr()
    assert "maximal_traces" in cap.err
    json.loads(cap.out)


def test_missing_file_exit_1(capsys):
    assert main(["run", "missing.vp"]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_parse_error_exit_1(tmp_path, capsys):
    f = tmp_path / "bad.vp"
    f.write_text("thread main {\n  while true { }\n}\n")
    assert main(["run", str(f)]) == EXIT_INPUT
    assert "line 2" in capsys.readouterr().err


def test_bad_flag_exit_1(capsys):
    assert main(["run", vp("fig1"), "--classes", "nope"]) == EXIT_INPUT


def test_limit_exit_2(capsys):
    code, rep = run_json(capsys, "run", vp("fib_modnone_u2"), "--max-traces", "3")
    assert code == EXIT_LIMIT
    assert rep["status"] == "limit"


def test_fail_on_assert(capsys):
    code, rep = run_json(capsys, "run", vp("racy_counter"))
    assert code == EXIT_OK
    assert rep["assert_violations"] == [{"thread": "main", "event": 6, "line": 9}]
    assert main(["run", vp("racy_counter"), "--fail-on-assert"]) == EXIT_ASSERT


def test_dump_traces(tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    main(["run", vp("fig1"), "--dump-traces", str(out)])
    lines = out.read_text().splitlines()
    # realized traces: the empty APO first, then the one extension
    assert len(lines) == 2
    assert json.loads(lines[0]) == []
    assert {"thread": "p2", "index": 3, "kind": "r", "var": "x", "value": 1} in json.loads(lines[1])


def test_json_byte_identical_without_timing():
    cmd = [sys.executable, "-m", "vcdpor.cli", "run", vp("float_read"), "--json", "--no-timing", "--classes", "vhb"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b
    assert json.loads(a)["time_ms"] is None


@pytest.mark.parametrize("name", ["fig3a_n2", "fib_mod2_u2"])
def test_compare_passes(name, capsys):
    assert main(["compare", vp(name)]) == EXIT_OK


def test_compare_json(capsys):
    code, rep = run_json(capsys, "compare", vp("fig1"))
    assert code == EXIT_OK
    assert rep["status"] == "pass"
    assert rep["oracle"]["states_digest"] == rep["vcdpor"]["states_digest"]


def test_broken_explorer_is_caught(monkeypatch, capsys):
    orig = explorer.candidate_writes
    monkeypatch.setattr(explorer, "candidate_writes", lambda t, C, r: orig(t, C, r)[:1])
    assert main(["compare", vp("branchy")]) == EXIT_DIFF
    assert "DIFF" in capsys.readouterr().out


def test_corpus_empty_dir(tmp_path, capsys):
    assert main(["corpus", str(tmp_path)]) == EXIT_OK
    assert "0 programs" in capsys.readouterr().out


def test_corpus_missing_dir(tmp_path, capsys):
    assert main(["corpus", str(tmp_path / "nope")]) == EXIT_INPUT


def test_corpus_flags_failing_sidecar(tmp_path, capsys):
    for name in ("fig1", "fig3a_n2"):
        shutil.copy(vp(name), tmp_path)
    (tmp_path / "fig1.expect.json").write_text(json.dumps({"maximal_traces": 1, "hb": 4}))
    (tmp_path / "fig3a_n2.expect.json").write_text(json.dumps({"oracle_traces": 7}))
    code = main(["corpus", str(tmp_path)])
    out = capsys.readouterr().out
    assert code != EXIT_OK
    assert "oracle_traces: expected 7, got 6" in out
    assert "1 passed" in out


def test_corpus_diff_outranks_sidecar(tmp_path, monkeypatch, capsys):
    shutil.copy(vp("branchy"), tmp_path)
    orig = explorer.candidate_writes
    monkeypatch.setattr(explorer, "candidate_writes", lambda t, C, r: orig(t, C, r)[:1])
    assert main(["corpus", str(tmp_path)]) == EXIT_DIFF
