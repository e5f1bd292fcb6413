from __future__ import annotations

import random

import pytest

from dabv import logic as L
from dabv.blocks import walk
from dabv.interpreter import initial_snapshot
from dabv.model import validate_dab
from dabv.randgen import (qe_instance, qe_signature, random_dab, random_dab_json, random_eliminable,
                          random_state_cube, saturated_instance)
from dabv.translator import translate_dab


@pytest.mark.parametrize("seed", range(0, 60, 3))
def test_random_dabs_are_small_and_valid(seed):
    d = random_dab(seed)
    assert validate_dab(d).ok
    assert len(d.schema.catalog) <= 3 and len(list(walk(d.root))) <= 8
    inst = saturated_instance(d)
    assert all(len(rows) <= 4 for rows in inst.values())
    initial_snapshot(d, inst)  # keys and foreign keys hold


def test_generation_is_deterministic():
    assert random_dab_json(11) == random_dab_json(11)
    assert random_dab_json(11) != random_dab_json(12)


def test_state_cubes_use_system_symbols(hiring_ts):
    rng = random.Random(0)
    names = {v.name for v in hiring_ts.variables} | set(hiring_ts.setting.arrays)
    for _ in range(50):
        c = random_state_cube(rng, hiring_ts, strongly_local=True)
        assert c.lits
        for l in c.lits:
            for t in (l[1], l[2]):
                for u in L.subterms(t):
                    assert u.kind in (L.CONST, L.IVAR, L.APP) or u.name in names


def test_eliminable_shapes():
    sig = qe_signature()
    rng = random.Random(1)
    for _ in range(50):
        lits, ys, xs = random_eliminable(rng, sig)
        assert lits and all(y.kind == L.DVAR for y in ys) and all(x.kind == L.VAR for x in xs)


def test_qe_instance_is_saturated():
    inst = qe_instance(copies=2)
    k1 = inst["f_R1_v"]
    assert sorted(k1.values()) == ["a", "a", "b", "b"]
    # every (parent, value) pair occurs for K2
    assert {(inst["f_R2_p"][k], inst["f_R2_w"][k]) for k in inst["f_R2_p"]} == {(p, v) for p in k1 for v in "ab"}
