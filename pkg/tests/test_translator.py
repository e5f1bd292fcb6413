from __future__ import annotations

import pytest

from suites import KIND_TABLE, kind_model
from dabv import logic as L
from dabv.model import hiring
from dabv.translator import (TranslationError, is_normal_form, rule_counts, show_system, translate_dab,
                             translate_property)

HIRING_COUNTS = {"HP": 2, "Main": 3, "Handling": 5, "AppMgmt": 2, "AppLoop": 4, "Body": 6, "AppReceived": 1,
                 "StopMsg": 1, "EvalCV": 1, "Stopped": 3, "EvalApp": 1, "AssignWinner": 1, "Decide": 3,
                 "DecideEligible": 1, "SelWin": 1, "MakeOffer": 1}


@pytest.mark.parametrize("label, body, block, count, labels, opts", KIND_TABLE, ids=[k[0] for k in KIND_TABLE])
def test_kind_rule_counts(label, body, block, count, labels, opts):
    ts = translate_dab(kind_model(body, labels), None, opts)
    assert rule_counts(ts).get(block, 0) == count
    assert all(is_normal_form(r, ts) for r in ts.rules)


def test_hiring_counts(hiring_ts):
    assert rule_counts(hiring_ts) == HIRING_COUNTS
    assert len(hiring_ts.rules) == sum(HIRING_COUNTS.values())


def test_hiring_rule_templates(hiring_ts):
    tpl = {r.base: r.template for r in hiring_ts.rules}
    assert tpl["EvalApp.T1"] == "insert"
    assert tpl["SelWin.T1"] == "delete"
    assert tpl["DecideEligible.T1"] == "cond"
    assert tpl["HP.T1"] == "set"


def test_set_semantics_changes_template():
    d = hiring()
    from dabv import updates as U
    ts = translate_dab(d.with_semantics(U.Semantics(U.SET)))
    assert {r.template for r in ts.rules if r.block == "EvalApp"} == {"set-insert"}


def test_rule_names_are_unique_and_based(hiring_ts):
    names = [r.name for r in hiring_ts.rules]
    assert len(names) == len(set(names))
    for r in hiring_ts.rules:
        assert r.name.startswith(r.base) and r.base.startswith(r.block + ".")


def test_repo_bound_index_constants():
    ts = translate_dab(hiring(), 2)
    assert ts.repo_bound == 2
    assert all(is_normal_form(r, ts) for r in ts.rules)


def test_property_translation(hiring_ts):
    cubes = translate_property(hiring().property("unsafe1"), hiring_ts)
    assert len(cubes) == 1
    c = cubes[0]
    assert len(c.indexes) == 1 and all(i.kind == L.IVAR for i in c.indexes)
    text = {repr(l) for l in c.lits}
    assert any("EvalApplifecycle" in t and "completed" in t for t in text)


def test_options_reduce_rules():
    body = {"name": "X", "kind": "sequence", "b1": {"name": "Y", "kind": "sequence", "b1": {"name": "A", "kind": "task", "spec": "SetA"},
                                                     "b2": {"name": "B", "kind": "task", "spec": "SetA"}},
            "b2": {"name": "C", "kind": "task", "spec": "SetA"}}
    d = kind_model(body)
    plain, fused = translate_dab(d), translate_dab(d, None, ("nseq",))
    assert len(fused.rules) < len(plain.rules)


def test_unknown_option():
    with pytest.raises((TranslationError, ValueError)):
        translate_dab(hiring(), None, ("turbo",))


def test_show_system_mentions_every_rule(hiring_ts):
    text = show_system(hiring_ts)
    assert all(r.name in text for r in hiring_ts.rules)
