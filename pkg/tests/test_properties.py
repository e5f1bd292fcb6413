"""Hypothesis property tests for invariants across modules."""
from __future__ import annotations

import itertools
import random

from hypothesis import HealthCheck, assume, given, settings, strategies as st

from oracles import SnapshotModel, exists_model, reachable_snapshots
from dabv import engine as E
from dabv import logic as L
from dabv.interpreter import ExplorationConfig, replay, simulate
from dabv.model import dab_from_json, dab_to_json
from dabv.randgen import (qe_instance, qe_signature, random_dab, random_eliminable, random_state_cube,
                          saturated_instance)
from dabv.smt.solver import Solver
from dabv.translator import rule_counts, translate_dab

SIG = qe_signature()
INST3 = qe_instance(SIG, copies=3)
seeds = st.integers(0, 10**6)
slow = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_qe_is_entailed_and_equivalent(seed):
    rng = random.Random(seed)
    lits, ys, xs = random_eliminable(rng, SIG, n_free=2, n_elim=2, max_lits=5)
    try:
        out = E.qe_cube(lits, ys, SIG)
    except E.Unsupported:
        assume(False)
    assert all(not E.data_vars(c) for c in out)
    f = L.conj([L.conj(lits), L.neg(L.disj([L.conj(c) for c in out]))])
    assert Solver(SIG).check(f, want_model=False).unsat
    car = INST3["carriers"]
    for combo in itertools.product(*[car[x.sort] for x in xs]):
        fx = dict(zip(xs, combo))
        assert exists_model(INST3, [lits], fx, list(ys)) == exists_model(INST3, out, fx, [])


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_canonical_is_idempotent(seed):
    d = random_dab(seed % 200)
    ts = translate_dab(d)
    c = random_state_cube(random.Random(seed), ts, max_index=3)
    once = E.canonical(c)
    assert E.canonical(once) == once


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_symmetric_rep_is_a_fixed_point(seed):
    d = random_dab(seed % 200, with_repo=True)
    ts = translate_dab(d, 3)
    c = random_state_cube(random.Random(seed), ts, max_index=2)
    for g in E.ground(E.canonical(c), ts):
        r = E.symmetric_rep(g, ts)
        assert E.symmetric_rep(r, ts).lits == r.lits
        assert len(r.lits) == len(g.lits)


@slow
@given(seeds)
def test_strong_locality_preserved(seed):
    rng = random.Random(seed)
    d = random_dab(seed % 300, with_repo=True)
    ts = translate_dab(d)
    rules = [r for r in ts.rules if r.updates and E.is_local_preserving(r, ts)]
    assume(rules)
    r = rng.choice(rules)
    phi = random_state_cube(rng, ts, strongly_local=True)
    assume(E.classify_formula(phi) == E.STRONGLY_LOCAL)
    for p in E.preimage(ts, r, phi):
        assert E.classify_formula(p) == E.STRONGLY_LOCAL


@slow
@given(seeds, st.integers(1, 25))
def test_simulated_runs_replay(seed, steps):
    d = random_dab(seed % 300)
    inst = saturated_instance(d)
    trace, final = simulate(d, inst, steps, seed)
    assert replay(trace, d, inst).key() == final.key()


@slow
@given(seeds)
def test_json_roundtrip_preserves_translation(seed):
    d = random_dab(seed % 300)
    again = dab_from_json(dab_to_json(d))
    assert rule_counts(translate_dab(again)) == rule_counts(translate_dab(d))


@slow
@given(seeds)
def test_initial_cubes_cover_property(seed):
    """A snapshot satisfies the property iff it satisfies one translated cube."""
    from dabv.interpreter import Interpreter
    from dabv.translator import translate_property
    d = random_dab(seed % 300)
    inst = saturated_instance(d)
    ts = translate_dab(d)
    it = Interpreter(d, inst, ExplorationConfig(repo_cap=2))
    name = sorted(d.properties)[seed % len(d.properties)]
    cubes = translate_property(d.property(name), ts)
    for s in reachable_snapshots(d, inst, ExplorationConfig(repo_cap=2), limit=150):
        m = SnapshotModel(ts, s, 3)
        assert it.holds(d.property(name), s) == any(m.holds(c) for c in cubes)
