from __future__ import annotations

import pytest

from dabv import query as Q


def test_parse_guard_answer_and_atoms(hiring_dab):
    g = Q.parse_guard({"name": "g", "answer": ["j", "u"], "body": "(and (rel Application j u s true) (> s 80))"},
                      hiring_dab.schema)
    assert [n for n, _ in g.answer] == ["j", "u"]
    assert dict(g.answer) == {"j": "jobcatID", "u": "userID"}
    (q,) = g.disjuncts
    assert any(isinstance(a, Q.Cmp) for a in q.atoms)
    assert Q.show_body(Q.parse_guard(Q.guard_to_json(g), hiring_dab.schema)) == Q.show_body(g)


def test_disjunction_kept_in_ast(hiring_dab):
    g = Q.parse_guard("(or (= $qualif true) (= $result false))", hiring_dab.schema)
    assert len(g.disjuncts) == 2


def test_sort_inference_from_relation(hiring_dab):
    g = Q.parse_guard({"answer": ["n"], "body": "(rel User $uid n a)"}, hiring_dab.schema)
    assert dict(g.answer)["n"] == "StringName"


@pytest.mark.parametrize("text", [
    "(rel Nope x)",
    "(rel User x)",
    "(= $nosuch 1)",
    "(and (rel User u n a) (= n u))",
    "(> $jcid 3)",
    "(and",
])
def test_parse_errors(hiring_dab, text):
    with pytest.raises(Q.ParseError):
        Q.parse_guard(text, hiring_dab.schema)


def test_repo_free_and_boolean(hiring_dab):
    s = hiring_dab.schema
    assert Q.is_repo_free(Q.parse_guard("(rel User $uid n a)", s), s)
    assert not Q.is_repo_free(Q.parse_guard("(rel Application j u x e)", s), s)
    assert Q.is_boolean(Q.parse_guard("(= $qualif true)", s))


@pytest.mark.parametrize("body, ok, clause", [
    ("(and (rel Application j u s e) (= $qualif true))", True, ""),
    ("(and (rel Application j u s e) (rel Application j2 u2 s2 e2))", False, "single-repo-atom"),
    ("(rel Application $jcid u s e)", False, "repo-case-var"),
    ("(and (rel Application j u s e) (rel User u n a) (= $uid u))", False, "repo-chi-overlap"),
])
def test_separation(hiring_dab, body, ok, clause):
    s = hiring_dab.schema
    rep = Q.is_separated(Q.parse_guard(body, s), s)
    assert bool(rep) is ok
    assert rep.clause == clause


def test_negated_repo_atom_rejected(hiring_dab):
    s = hiring_dab.schema
    g = Q.parse_guard("(not (rel Application j u x e))", s)
    assert "negated-repo" in Q.validate_guard(g, s).clauses()


def test_property_validation(hiring_dab):
    s = hiring_dab.schema
    good = hiring_dab.parse_property("(and (= $EvalApplifecycle completed) (rel Application j u s e))")
    assert Q.validate_property(good, s, hiring_dab.block_names).ok
    loose = hiring_dab.parse_property("(rel User u n a)")
    assert "unanchored-var" in Q.validate_property(loose, s, hiring_dab.block_names).clauses()
