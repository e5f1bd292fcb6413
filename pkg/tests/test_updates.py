from __future__ import annotations

import pytest

from dabv import updates as U
from dabv.query import ParseError


def test_hiring_updates_validate(hiring_dab):
    for u in hiring_dab.updates.values():
        assert U.validate_update(u, hiring_dab.schema).ok, u.name


def test_effect_shapes(hiring_dab):
    up = hiring_dab.updates
    assert isinstance(up["EvalApp"].eff, U.InsertSet) and up["EvalApp"].eff.relation == "Application"
    assert isinstance(up["SelWinner"].eff, U.DeleteSet)
    assert isinstance(up["MarkE"].eff, U.CondUpdate)
    assert dict(up["SelWinner"].sets).keys() == {"jcid", "uid", "winner", "result", "qualif"}


@pytest.mark.parametrize("name, clause", [
    ("InsJobCat", "Clause2a"), ("InsUser", "Clause2a"), ("CheckQual", "Clause2a"),
    ("EvalApp", "Clause1"), ("MarkE", "Clause4"), ("SelWinner", "Clause3"),
])
def test_theorem_clauses(hiring_dab, name, clause):
    assert U.classify_update(hiring_dab.updates[name], hiring_dab.schema).clause == clause


def test_set_insertion_violates(hiring_dab):
    c = U.classify_update(hiring_dab.updates["EvalApp"], hiring_dab.schema, U.Semantics(U.SET))
    assert not c.ok


def test_partial_delete_violates(hiring_dab):
    raw = {"name": "D", "pre": {"answer": ["jc", "u", "s", "e"], "body": "(rel Application jc u s e)"},
           "eff": {"kind": "deleteSet", "from": "Application", "tuple": ["jc", "u", "s", "e"],
                   "set": {"jcid": "jc"}}}
    u = U.parse_update(raw, hiring_dab.schema)
    assert U.classify_update(u, hiring_dab.schema).clause == "Violation"


def test_json_roundtrip(hiring_dab):
    for u in hiring_dab.updates.values():
        again = U.parse_update(U.update_to_json(u), hiring_dab.schema)
        assert again.eff == u.eff and again.pre.answer == u.pre.answer


@pytest.mark.parametrize("raw, clause", [
    ({"name": "X", "eff": {"kind": "insertSet", "into": "User", "tuple": ["$uid", "n", "a"]},
      "pre": {"answer": ["n", "a"], "body": "(rel User $uid n a)"}}, "repo-target"),
    ({"name": "X", "eff": {"kind": "insertSet"}}, "empty-effect"),
    ({"name": "X", "eff": {"kind": "condUpdate", "rel": "Application", "rowVars": ["a", "b", "c", "d"],
                           "tree": {"if": "(rel Application a b c d)", "then": ["a", "b", "c", "d"],
                                    "else": ["a", "b", "c", "d"]}}}, "filter-repo-free"),
])
def test_update_violations(hiring_dab, raw, clause):
    u = U.parse_update(raw, hiring_dab.schema)
    assert clause in U.validate_update(u, hiring_dab.schema).clauses()


def test_unknown_effect_kind(hiring_dab):
    with pytest.raises(ParseError):
        U.parse_update({"name": "X", "eff": {"kind": "upsert"}}, hiring_dab.schema)


def test_arity_mismatch_rejected(hiring_dab):
    with pytest.raises(ParseError):
        U.parse_update({"name": "X", "eff": {"kind": "insertSet", "into": "Application", "tuple": ["$jcid"]}},
                       hiring_dab.schema)
