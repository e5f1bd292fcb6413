from __future__ import annotations

import pytest

from conftest import task, tiny_json
from dabv import blocks as B
from dabv.model import ModelError, dab_from_json, dab_to_json, validate_dab


def test_hiring_tree(hiring_dab):
    root = hiring_dab.root
    assert root.kind == B.PROCESS
    names = [b.name for b in B.walk(root)]
    assert names[0] == "HP" and len(names) == len(set(names))
    handling = B.find_block(root, "Handling")
    assert handling.kind == B.FORWARD
    stopped = B.find_block(root, "Stopped")
    assert B.raises_error(stopped) and B.always_error(stopped)
    assert B.error_catcher(root, stopped) is handling
    assert B.parents(root)["EvalApp"].name == "AppLoop"


def test_control_variables_cover_all_blocks(hiring_dab):
    ctl = B.control_variables(hiring_dab.root)
    assert len(ctl) == len(list(B.walk(hiring_dab.root)))
    assert "HPlifecycle" in ctl


def test_json_roundtrip(hiring_dab):
    raw = B.block_to_json(hiring_dab.root)
    assert sorted(B.block_names_json(raw)) == sorted(b.name for b in B.walk(hiring_dab.root))
    d = dab_to_json(hiring_dab)
    again = dab_from_json(d)
    assert B.block_to_json(again.root) == raw


def test_nary_sequence_becomes_nested():
    d = dab_from_json(tiny_json({"name": "S", "kind": "sequence", "blocks": [task("A"), task("B"), task("C")]}))
    s = B.find_block(d.root, "S")
    assert s.child("b1").name == "A"
    assert s.child("b2").kind == B.SEQUENCE and s.child("b2").child("b2").name == "C"


@pytest.mark.parametrize("inner, labels, clause", [
    ({"name": "S", "kind": "sequence", "b1": task("A"), "b2": task("A")}, (), "name-clash"),
    ({"name": "X", "kind": "backwardException", "eventType": "msg", "a": task("A"), "handler": task("B")},
     (), "exception-scope"),
    ({"name": "C", "kind": "possibleCompletion", "phi1": "true", "end": {"type": "error", "label": "E"}},
     (), "dangling-label"),
    ({"name": "C", "kind": "choice", "phi1": "(rel R k a)", "b1": task("A"), "b2": task("B")},
     (), "condition"),
    ({"name": "X", "kind": "task", "spec": "Ins", "atomic": False}, (), "nonatomic-repo"),
])
def test_process_violations(inner, labels, clause):
    d = dab_from_json(tiny_json(inner, error_labels=labels))
    assert clause in validate_dab(d).clauses()


def test_unknown_kind_is_model_error():
    with pytest.raises(ModelError):
        dab_from_json(tiny_json({"name": "X", "kind": "teleport"}))
