"""Independent reference evaluators used by the tests.

Nothing here calls the symbolic engine: formulas are evaluated directly on
concrete snapshots and finite function tables.
"""
from __future__ import annotations

import itertools
from collections import deque

from dabv import logic as L
from dabv.interpreter import Interpreter


class UnboundTerm(Exception):
    pass


# -- state formulas on snapshots ---------------------------------------------------

class SnapshotModel:
    """A snapshot seen as a first-order structure over the translated signature."""

    def __init__(self, ts, snap, spare_cells: int = 3):
        self.ts = ts
        self.env = snap.env
        self.funcs: dict = {}
        schema = ts.dab.schema
        for rel, rows in snap.catalog:
            r = schema.relation(rel)
            for k, (a, _) in enumerate(r.attributes[1:], 1):
                self.funcs[f"f_{rel}_{a}"] = {row[0]: row[k] for row in rows}
        self.arrays: dict = {a: {} for a in ts.setting.arrays}
        self.cells: dict = {s: [] for s in ts.setting.index_sorts.values()}
        for i, rel, row in snap.repo:
            r = schema.relation(rel)
            self.cells[ts.setting.index_sorts[rel]].append(i)
            for (a, _), v in zip(r.attributes, row):
                self.arrays[f"{rel}.{a}"][i] = v
        for s in self.cells:
            self.cells[s] += [f"free{k}" for k in range(spare_cells)]

    def value(self, t: L.Term, bind: dict):
        if t.kind == L.CONST:
            return t.name
        if t.kind == L.VAR:
            return self.env[t.name]
        if t.kind in (L.IVAR, L.DVAR):
            if t not in bind:
                raise UnboundTerm(repr(t))
            return bind[t]
        a = self.value(t.arg, bind)
        if t.kind == L.APP:
            return None if a is None else self.funcs[t.name][a]
        return self.arrays[t.name].get(a)

    def lit(self, l, bind: dict) -> bool:
        a, b = self.value(l[1], bind), self.value(l[2], bind)
        if l[0] == L.EQ:
            return a == b
        if l[0] == L.NE:
            return a != b
        return L._cmp_value(l[0], a, b)

    def holds(self, sf) -> bool:
        idx = list(sf.indexes)
        pools = [self.cells[e.sort] for e in idx]
        for combo in itertools.product(*pools):
            bind = dict(zip(idx, combo))
            if all(self.lit(l, bind) for l in sf.lits):
                return True
        return False


def holds_any(ts, snap, cubes) -> bool:
    m = SnapshotModel(ts, snap, spare_cells=max([len(c.indexes) for c in cubes] + [1]))
    return any(m.holds(c) for c in cubes)


def reachable_snapshots(dab, instance, cfg, limit: int = 2000) -> list:
    it = Interpreter(dab, instance, cfg)
    seen = {it.init.key(): it.init}
    todo = deque([it.init])
    while todo and len(seen) < limit:
        s = todo.popleft()
        for _, t in it.moves(s):
            k = t.key()
            if k not in seen:
                seen[k] = t
                todo.append(t)
    return list(seen.values())


def step_base(name: str) -> str:
    head, _, tail = name.rpartition(".")
    return head if head and tail.startswith("d") and tail[1:].isdigit() else name


def predecessors(it: Interpreter, ts, universe: list, base: str, target) -> set:
    """Snapshots of `universe` with a `base` step into a state satisfying target."""
    out = set()
    for s in universe:
        for st, t in it.moves(s):
            if step_base(st.name) == base and SnapshotModel(ts, t, len(target.indexes) + 1).holds(target):
                out.add(s.key())
                break
    return out


# -- finite two-level instances for elimination ----------------------------------------

def fvalue(inst: dict, t: L.Term, bind: dict):
    if t.kind == L.CONST:
        return t.name
    if t.arg is None:
        return bind[t]
    a = fvalue(inst, t.arg, bind)
    return None if a is None else inst[t.name][a]


def flit(inst: dict, l, bind: dict) -> bool:
    a, b = fvalue(inst, l[1], bind), fvalue(inst, l[2], bind)
    return (a == b) if l[0] == L.EQ else (a != b)


def exists_model(inst: dict, cubes: list, fixed: dict, free: list) -> bool:
    """Whether some cube holds for some assignment of `free` extending `fixed`."""
    car = inst["carriers"]
    for combo in itertools.product(*[car[v.sort] for v in free]):
        bind = dict(fixed)
        bind.update(zip(free, combo))
        for c in cubes:
            if all(flit(inst, l, bind) for l in c):
                return True
    return False
