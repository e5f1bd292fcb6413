from __future__ import annotations

import random
import shutil

import pytest
from hypothesis import assume, given, settings, strategies as st

from dabv import logic as L
from dabv.randgen import qe_signature
from dabv.smt.naive import naive_check
from dabv.smt.smtlib import ExternalSolver, parse_sexprs, script, system_script
from dabv.smt.solver import SAT, UNSAT, Solver, eval_model

SIG = qe_signature()
ORD = SIG.copy()
ORD.add_sort(L.SortInfo("N", (1, 2, 3), ordinal=True))


VARS = [L.var(f"{s.lower()}{k}", s) for s in ("K2", "K1", "V") for k in (0, 1)]
NUMS = [L.var("n0", "N"), L.var("n1", "N"), L.const(2, "N")]


def _terms(v):
    if v.sort == "K2":
        p = L.app("f_R2_p", v, "K1")
        return [v, p, L.app("f_R2_w", v, "V"), L.app("f_R1_v", p, "V")]
    if v.sort == "K1":
        return [v, L.app("f_R1_v", v, "V")]
    return [v]


TERMS = [t for v in VARS for t in _terms(v)]


def random_lit(rng: random.Random):
    if rng.random() < 0.2:
        a, b = rng.sample(NUMS, 2)
        return L.lit(rng.choice([L.LT, L.LE, L.EQ]), a, b)
    a = rng.choice(TERMS)
    pool = [t for t in TERMS if t.sort == a.sort and t is not a] + [L.undef(a.sort)]
    if a.sort == "V":
        pool += [L.const("a", "V"), L.const("b", "V")]
    return L.lit(rng.choice([L.EQ, L.NE]), a, rng.choice(pool))


def random_formula(rng: random.Random, depth: int = 2):
    if depth == 0 or rng.random() < 0.3:
        return L.conj([random_lit(rng) for _ in range(rng.randint(1, 3))])
    parts = [random_formula(rng, depth - 1) for _ in range(rng.randint(2, 3))]
    f = L.disj(parts) if rng.random() < 0.5 else L.conj(parts)
    return L.neg(f) if rng.random() < 0.3 else f


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_builtin_matches_naive(seed):
    f = random_formula(random.Random(seed))
    try:
        ref = naive_check(f, ORD, limit=200_000)
    except OverflowError:
        assume(False)
    r = Solver(ORD).check(f)
    assert r.status == (SAT if ref is not None else UNSAT)
    if r.sat:
        assert eval_model(r.model, f)


@pytest.mark.skipif(shutil.which("z3") is None, reason="z3 not installed")
def test_builtin_matches_z3():
    rng = random.Random(7)
    z3 = ExternalSolver(ORD, "z3 -in")
    try:
        for _ in range(150):
            f = random_formula(rng)
            assert Solver(ORD).check(f, want_model=False).status == z3.check(f, want_model=False).status
    finally:
        z3.close()


def test_functional_consistency():
    a, b = L.var("a", "K1"), L.var("b", "K1")
    fa, fb = L.app("f_R1_v", a, "V"), L.app("f_R1_v", b, "V")
    f = L.conj([L.eq(a, b), L.ne(fa, fb)])
    assert Solver(SIG).check(f).unsat


def test_undef_axiom():
    u = L.undef("K1")
    f = L.ne(L.app("f_R1_v", u, "V"), L.undef("V"))
    assert Solver(SIG).check(f).unsat


def test_finite_sort_pigeonhole():
    xs = [L.var(f"v{k}", "V") for k in range(4)]
    f = L.conj([L.ne(x, y) for i, x in enumerate(xs) for y in xs[i + 1:]])
    assert Solver(SIG).check(f).unsat  # only a, b and undef exist


def test_script_is_well_formed():
    rng = random.Random(3)
    for _ in range(20):
        text = script(random_formula(rng), ORD)
        assert parse_sexprs(text)[-1] == ["check-sat"]


def test_system_script_parses(hiring_ts):
    forms = parse_sexprs(system_script(hiring_ts))
    assert len(forms) > len(hiring_ts.rules)
