from __future__ import annotations

import dataclasses

import pytest

from conftest import tiny_json
from suites import PICK_INS, SET_INS, set_insertion_model
from dabv import logic as L
from dabv import engine as E
from dabv.interpreter import NOT_REACHABLE, REACHABLE, ExplorationConfig, explicit_reach
from dabv.model import dab_from_json, hiring
from dabv.randgen import qe_signature, saturated_instance
from dabv.translator import StateFormula, translate_dab, translate_property

SIG = qe_signature()
V, K1, K2 = "V", "K1", "K2"


def _terms():
    x = L.var("x", V)
    y = L.dvar("y", K1)
    return x, y, L.app("f_R1_v", y, V)


def test_qe_solves_equality():
    x, y, fy = _terms()
    k = L.var("k", K1)
    out = E.qe_cube(frozenset({L.eq(y, k), L.eq(fy, x)}), [y], SIG)
    assert out == [frozenset({L.eq(L.app("f_R1_v", k, V), x)})]


def test_qe_drops_unconstrained_var():
    x, y, fy = _terms()
    out = E.qe_cube(frozenset({L.ne(y, L.undef(K1)), L.ne(x, L.undef(V))}), [y], SIG)
    assert out == [frozenset({L.ne(x, L.undef(V))})]


def test_qe_keeps_no_data_vars():
    x, y, fy = _terms()
    z = L.dvar("z", K2)
    lits = frozenset({L.eq(L.app("f_R2_p", z, K1), y), L.ne(fy, L.undef(V)), L.eq(L.app("f_R2_w", z, V), x)})
    for c in E.qe_cube(lits, [y, z], SIG):
        assert not E.data_vars(c)


def test_classify_formula():
    e = L.ivar("e", "S_index")
    f = L.ivar("f", "S_index")
    rd = lambda i: L.read("S.Sf", i, "Flag")
    vf = L.var("vf", "Flag")
    a = L.const("a", "Flag")
    assert E.classify_formula(StateFormula((e,), frozenset({L.eq(rd(e), a)}))) == E.STRONGLY_LOCAL
    assert E.classify_formula(StateFormula((e,), frozenset({L.eq(rd(e), vf)}))) == E.LOCAL
    assert E.classify_formula(StateFormula((e, f), frozenset({L.eq(rd(e), rd(f))}))) == E.NON_LOCAL
    assert E.classify_formula(StateFormula((e, f), frozenset({L.ne(e, f), L.eq(rd(f), a)}))) == E.STRONGLY_LOCAL


def test_hiring_classification(hiring_dab):
    rep = E.classify_dab(hiring_dab)
    assert rep.acyclic and rep.klass == E.SEPARATED_MULTISET
    assert rep.clauses["EvalApp"].clause == "Clause1"
    assert rep.clauses["SelWinner"].clause == "Clause3"
    assert E.classify_dab(hiring_dab, None, 2).klass == E.REPO_BOUNDED
    assert E.termination_class(set_insertion_model()) == E.SEMI


def test_local_preserving_rules(hiring_ts):
    lp = {r.base for r in hiring_ts.rules if E.is_local_preserving(r, hiring_ts)}
    assert {"EvalApp.T1", "SelWin.T1", "DecideEligible.T1"} <= lp
    sts = set_insertion_model()
    ts = translate_dab(sts)
    ins = [r for r in ts.rules if r.template == "set-insert"]
    assert ins and not any(E.is_local_preserving(r, ts) for r in ins)


def test_preimage_of_untouched_formula_is_guarded(hiring_ts):
    r = next(r for r in hiring_ts.rules if r.base == "HP.T1")
    phi = translate_property(hiring().property("unsafe1"), hiring_ts)[0]
    assert E.preimage(hiring_ts, r, phi) == []
    assert E.preimage(hiring_ts, r, phi, full=True)


@pytest.mark.parametrize("body, formula, expected", [
    (PICK_INS, "(rel S x a)", E.UNSAFE),
    (PICK_INS, "(rel S x b)", E.SAFE),
    (SET_INS, "(rel S x y)", E.SAFE),
    (SET_INS, "(= $Plifecycle completed)", E.SAFE),
    (PICK_INS, "(= $Plifecycle completed)", E.UNSAFE),
])
@pytest.mark.parametrize("bound", [None, 2])
def test_tiny_verdicts_match_explicit(body, formula, expected, bound):
    dab = dab_from_json(tiny_json(body, props=[{"name": "p", "formula": formula}]))
    ts = translate_dab(dab, bound)
    v = E.backward_reach(ts, translate_property(dab.property("p"), ts), E.Config(timeout=30))
    assert v.status == expected
    ref = explicit_reach(dab, saturated_instance(dab), dab.property("p"), ExplorationConfig(repo_cap=bound or 3))
    assert ref.status == (REACHABLE if expected == E.UNSAFE else NOT_REACHABLE)
    if v.status == E.UNSAFE:
        assert E.extract_trace(ts, v, dab.property("p")).witness["replayed"]


@pytest.mark.parametrize("flag", ["control_invariant", "free_cells", "symmetry"])
@pytest.mark.parametrize("prop, bound", [("unsafe1", None), ("safe4", None), ("unsafe1", 2)])
def test_reductions_preserve_verdicts(hiring_dab, flag, prop, bound):
    ts = translate_dab(hiring_dab, bound)
    unsafe = translate_property(hiring_dab.property(prop), ts)
    on = E.backward_reach(ts, unsafe, E.Config(timeout=60))
    off = E.backward_reach(ts, unsafe, dataclasses.replace(E.Config(timeout=60), **{flag: False}))
    assert on.status == off.status != E.UNKNOWN


def test_depth_limit_gives_unknown(hiring_ts, hiring_dab):
    unsafe = translate_property(hiring_dab.property("termination"), hiring_ts)
    v = E.backward_reach(hiring_ts, unsafe, E.Config(max_depth=1))
    assert v.status == E.UNKNOWN and v.reason == "depth-limit"


def test_unsafe_trace_is_rule_bases(hiring_ts, hiring_dab):
    prop = hiring_dab.property("unsafe1")
    v = E.backward_reach(hiring_ts, translate_property(prop, hiring_ts))
    assert v.status == E.UNSAFE
    bases = {r.base for r in hiring_ts.rules}
    assert v.trace and all(t in bases for t in v.trace)
    v = E.extract_trace(hiring_ts, v, prop)
    assert v.witness["replayed"]
