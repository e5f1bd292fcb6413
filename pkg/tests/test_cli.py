from __future__ import annotations

import json

import pytest

from conftest import tiny_json
from suites import PICK_INS
from dabv.cli import EXIT_INPUT, EXIT_SAFE, EXIT_UNKNOWN, EXIT_UNSAFE, exit_code, main
from dabv.model import bundled

HIRING = str(bundled("hiring.json"))
INSTANCE = str(bundled("hiring_instance.json"))


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_safe(capsys):
    code, out, _ = run(capsys, "check", HIRING, "--prop", "safe4")
    assert code == EXIT_SAFE and "SAFE" in out


def test_check_unsafe_json(capsys):
    code, out, _ = run(capsys, "check", HIRING, "--prop", "unsafe1", "--json")
    d = json.loads(out)
    assert code == EXIT_UNSAFE and d["formatVersion"] == 1
    r = d["results"][0]
    assert r["verdict"] == "unsafe" and r["trace"] and r["witness"]["replayed"]


def test_check_unknown_on_depth(capsys):
    code, out, _ = run(capsys, "check", HIRING, "--prop", "termination", "--depth", "1")
    assert code == EXIT_UNKNOWN and "depth-limit" in out


@pytest.mark.parametrize("argv", [
    ("check", "/nonexistent.json"),
    ("check", HIRING, "--prop", "nope"),
    ("check", HIRING, "--repo-bound", "0"),
    ("check", HIRING, "--opt", "turbo"),
])
def test_input_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_INPUT and err.startswith("dabv: error:")


def test_invalid_model(tmp_path, capsys):
    raw = tiny_json({"name": "S", "kind": "sequence", "b1": {"name": "A", "kind": "task", "spec": "SetA"},
                     "b2": {"name": "A", "kind": "task", "spec": "SetA"}})
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(raw))
    code, _, err = run(capsys, "check", str(p))
    assert code == EXIT_INPUT and "name-clash" in err


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", HIRING)
    assert code == 0
    assert "catalog: acyclic" in out and "class: DecidableSeparatedMultiset" in out
    assert "EvalApp: Clause1" in out and "SelWinner: Clause3" in out


def test_classify_json_set_semantics(capsys):
    code, out, _ = run(capsys, "classify", HIRING, "--insertion", "set", "--json")
    d = json.loads(out)
    assert d["class"] == "SemiDecidable" and d["updates"]["EvalApp"]["clause"] == "Violation"


def test_translate(capsys):
    code, out, _ = run(capsys, "translate", HIRING, "--json")
    d = json.loads(out)
    assert code == 0 and sum(d["counts"].values()) == len(d["rules"]) == 36
    code, out, _ = run(capsys, "translate", HIRING, "--format", "smt2")
    assert code == 0 and out.count("(") == out.count(")")


def test_simulate(capsys):
    code, out, _ = run(capsys, "simulate", HIRING, "--instance", INSTANCE, "--steps", "5", "--json")
    d = json.loads(out)
    assert code == 0 and len(d["trace"]) == 5


def test_simulate_exhaustive(tmp_path, capsys):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(tiny_json(PICK_INS, props=[{"name": "p", "formula": "(rel S x a)"}])))
    inst = tmp_path / "i.json"
    inst.write_text(json.dumps({"R": [["k1", "a"], ["k2", "b"]]}))
    code, out, _ = run(capsys, "simulate", str(p), "--instance", str(inst), "--exhaustive")
    assert code == EXIT_UNSAFE and "Reachable" in out


def test_exit_code_priority():
    assert exit_code(["safe", "unsafe"]) == EXIT_UNSAFE
    assert exit_code(["unsafe", "unknown"]) == EXIT_UNKNOWN
    assert exit_code(["safe"]) == EXIT_SAFE
