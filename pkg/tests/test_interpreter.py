from __future__ import annotations

import pytest

from conftest import TINY_INSTANCE, task, tiny_dab, tiny_json
from oracles import reachable_snapshots
from suites import PICK_INS, SET_INS
from dabv.interpreter import (EXHAUSTED, NOT_REACHABLE, REACHABLE, ExplorationConfig, InstanceError,
                              Interpreter, ReplayError, initial_snapshot, explicit_reach, replay, simulate)
from dabv.model import dab_from_json


def test_single_task_run():
    it = Interpreter(tiny_dab(task("A")), TINY_INSTANCE)
    s, names = it.init, []
    while True:
        ms = list(it.moves(s))
        if not ms:
            break
        assert len(ms) == 1
        st, s = ms[0]
        names.append(st.name)
    assert names == ["P.T1", "A.T1", "P.T2"]
    assert s.value("Plifecycle") == "completed" and s.value("vf") == "a" and s.value("vk") is None


@pytest.mark.parametrize("body, count", [
    (task("A"), 4), (SET_INS, 5), (PICK_INS, 21), (task("A", "Pick", atomic=False), 8),
])
def test_reachable_state_counts(body, count):
    assert len(reachable_snapshots(tiny_dab(body), TINY_INSTANCE, ExplorationConfig(repo_cap=3))) == count


def test_pick_binds_only_matching_keys():
    it = Interpreter(tiny_dab(task("A", "Pick")), TINY_INSTANCE)
    s = next(t for _, t in it.moves(it.init))
    picked = {t.value("vk") for _, t in it.moves(s)}
    assert picked == {"k1", "k3"}


def test_repo_cap_blocks_insertion():
    body = {"name": "L", "kind": "loop", "phi1": "true",
            "b1": {"name": "S1", "kind": "sequence", "b1": task("A", "Pick"), "b2": task("F", "Flip")},
            "b2": task("B", "Ins")}
    d = tiny_dab(body)
    for cap in (1, 2):
        states = reachable_snapshots(d, TINY_INSTANCE, ExplorationConfig(repo_cap=cap), limit=5000)
        assert max(s.count("S") for s in states) == cap


def test_explicit_reach_and_replay():
    d = dab_from_json(tiny_json(PICK_INS, props=[{"name": "p", "formula": "(rel S x a)"},
                                                  {"name": "q", "formula": "(rel S x b)"}]))
    r = explicit_reach(d, TINY_INSTANCE, d.property("p"))
    assert r.status == REACHABLE and r.final.count("S") == 1
    out = replay([s.name for s in r.trace], d, TINY_INSTANCE, goal=d.property("p"))
    assert out.count("S") == 1
    assert explicit_reach(d, TINY_INSTANCE, d.property("q")).status == NOT_REACHABLE
    assert explicit_reach(d, TINY_INSTANCE, d.property("q"), ExplorationConfig(max_states=3)).status == EXHAUSTED


def test_replay_rejects_inapplicable():
    d = tiny_dab(task("A"))
    with pytest.raises(ReplayError):
        replay(["A.T1"], d, TINY_INSTANCE)


@pytest.mark.parametrize("inst", [
    {"R": [["k1", "a"], ["k1", "b"]]},
    {"R": [["k1", "c"]]},
    {"R": [["k1"]]},
    {"T": []},
])
def test_bad_instances(inst):
    with pytest.raises(InstanceError):
        initial_snapshot(tiny_dab(task("A")), inst)


def test_simulate_is_deterministic_per_seed(hiring_dab, hiring_inst):
    a = simulate(hiring_dab, hiring_inst, 15, seed=4)
    b = simulate(hiring_dab, hiring_inst, 15, seed=4)
    assert a[0] == b[0] and a[1].key() == b[1].key()
    assert replay(a[0], hiring_dab, hiring_inst).key() == a[1].key()


def test_hiring_unsafe1_is_reachable(hiring_dab, hiring_inst):
    r = explicit_reach(hiring_dab, hiring_inst, hiring_dab.property("unsafe1"), ExplorationConfig(repo_cap=2))
    assert r.status == REACHABLE and r.trace[-1].name == "EvalApp.T1"
