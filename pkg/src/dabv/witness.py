"""Concrete witnesses for unsafe verdicts.

The rule sequence found by backward search is unrolled forward
symbolically from the initial state, with every index parameter mapped to an
existing or a fresh cell.  A model of the unrolling gives the catalog
instance and the answer chosen at each step; the interpreter then replays
the trace on that instance.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from . import logic as L
from .interpreter import ExplorationConfig, ReplayError, Step, replay
from .smt.solver import Solver, SAT
from .translator import Rule, StateFormula, TransitionSystem


@dataclass
class _Frame:
    vars: dict
    cells: dict  # relation -> [cell constant]
    vals: dict  # (array, cell) -> term
    used: int = 0


@dataclass
class Witness:
    instance: dict
    steps: list  # [Step]
    pools: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"instance": self.instance, "steps": [s.to_json() for s in self.steps]}


class _Unroller:
    def __init__(self, ts: TransitionSystem, budget: int = 400_000):
        self.ts = ts
        self.solver = Solver(ts.sig, budget)
        self.rel_of: dict = {}
        self.arrays_of: dict = {}
        for a, (rel, _attr, idx, srt) in ts.setting.arrays.items():
            self.arrays_of.setdefault(rel, []).append((a, srt))
            self.rel_of[idx] = rel

    def cell_pool(self, rel: str, fr: _Frame) -> Optional[L.Term]:
        bound = self.ts.repo_bound
        idx = next(s for s, r in self.rel_of.items() if r == rel)
        k = len(fr.cells.get(rel, []))
        if bound is not None:
            if k >= bound:
                return None
            return L.const(self.ts.index_constants(rel)[k], idx)
        return L.const(f"{rel}@{k}", idx)

    def inst(self, f, m: dict, fr: _Frame):
        g = L.subst(f, m) if m else f
        reads = {t: fr.vals.get((t.name, t.arg), L.undef(t.sort)) for t in L.terms_of(g) if t.kind == L.READ}
        return L.subst(g, reads) if reads else g

    def inst_term(self, t: L.Term, m: dict, fr: _Frame) -> L.Term:
        t = L.subst_term(t, m)
        if t.kind == L.READ:
            return fr.vals.get((t.name, t.arg), L.undef(t.sort))
        reads = {s: fr.vals.get((s.name, s.arg), L.undef(s.sort)) for s in L.subterms(t) if s.kind == L.READ}
        return L.subst_term(t, reads) if reads else t

    def placements(self, r: Rule, fr: _Frame) -> list:
        idx = [p for p in r.params if p.kind == L.IVAR]
        opts = []
        for p in idx:
            rel = self.rel_of[p.sort]
            o = list(fr.cells.get(rel, []))
            opts.append((p, rel, o))
        out = []
        for combo in itertools.product(*[o + ["new"] for _, _, o in opts]):
            out.append(list(zip([p for p, _, _ in opts], [rel for _, rel, _ in opts], combo)))
        return out

    def step(self, i: int, r: Rule, fr: _Frame, place) -> tuple:
        cells = {k: list(v) for k, v in fr.cells.items()}
        nf = _Frame(dict(fr.vars), cells, dict(fr.vals), fr.used)
        m = dict(nf.vars)
        for p, rel, c in place:
            if c == "new":
                tmp = _Frame(nf.vars, nf.cells, nf.vals)
                c = self.cell_pool(rel, tmp)
                if c is None:
                    return None
                nf.cells.setdefault(rel, []).append(c)
            m[p] = c
        for p in r.params:
            if p.kind == L.DVAR:
                m[p] = L.dvar(f"s{i}.{p.name}", p.sort)
        cons = [self.inst(r.guard, m, fr)]
        new_vals = dict(fr.vals)
        for u in r.updates:
            arrs = self.arrays_of[u.relation]
            for c in nf.cells.get(u.relation, []):
                mj = dict(m)
                mj[u.j] = c
                for a, srt in arrs:
                    old = fr.vals.get((a, c), L.undef(srt))
                    alts = []
                    for cs in u.cases:
                        if cs.index is not None:
                            hit = L.eq(mj.get(cs.index, cs.index), c)
                        else:
                            hit = L.TRUE
                        cond = L.conj([hit, self.inst(cs.cond, mj, fr)])
                        v = cs.value(a)
                        alts.append((cond, old if v is None else self.inst_term(v, mj, fr)))
                    new_vals[(a, c)] = self._ite(alts, old, cons, f"s{i}.{a}.{c.name}")
        for x, t in r.assign:
            nf.vars[x] = self.inst_term(t, m, fr)
        nf.vals = new_vals
        witness = {n: L.subst_term(t, m) for n, t in r.witness}
        witness = {n: self.inst_term(t, {}, fr) for n, t in witness.items()}
        return nf, L.conj(cons), witness

    def _ite(self, alts: list, old: L.Term, cons: list, name: str) -> L.Term:
        prior = []
        for cond, v in alts:
            if cond == L.FALSE:
                continue
            if cond == L.TRUE and not prior:
                return v
            break
        else:
            return old
        w = L.dvar(name, old.sort)
        clauses = []
        neg_prior = []
        for cond, v in alts:
            clauses.append(L.conj(neg_prior + [cond, L.eq(w, v)]))
            neg_prior.append(L.neg(cond))
        clauses.append(L.conj(neg_prior + [L.eq(w, old)]))
        cons.append(L.disj(clauses))
        return w

    def run(self, rules: list, target: StateFormula, max_tries: int = 4000):
        init = {v: (L.const(val, v.sort) if val is not None else L.undef(v.sort)) for v, val in self.ts.init.items()}
        fr0 = _Frame(init, {}, {})
        tries = [0]

        def go(i, fr, cons, wit):
            tries[0] += 1
            if tries[0] > max_tries:
                return None
            if i == len(rules):
                ivs = list(target.indexes)
                pools = [list(fr.cells.get(self.rel_of[e.sort], [])) for e in ivs]
                for combo in itertools.product(*pools):
                    f = L.conj(cons + [self.inst(target.formula(), dict(zip(ivs, combo)) | fr.vars, fr)])
                    res = self.solver.check(f, want_model=True)
                    if res.status == SAT:
                        return res.model, wit, f
                return None
            r = self.ts.rule(rules[i])
            for place in self.placements(r, fr):
                out = self.step(i, r, fr, place)
                if out is None:
                    continue
                nf, c, w = out
                if c == L.FALSE:
                    continue
                cs = cons + [c]
                if self.solver.check(L.conj(cs), want_model=False).status != SAT:
                    continue
                got = go(i + 1, nf, cs, wit + [w])
                if got is not None:
                    return got
            return None

        return go(0, fr0, [], [])


def _catalog(ts: TransitionSystem, model, f) -> dict:
    schema = ts.dab.schema
    keys: dict = {}
    for t in sorted(L.terms_of(f), key=lambda t: t.key):
        try:
            v = model.value(t)
        except KeyError:
            continue
        if v is not None and schema.keyed_by(t.sort) is not None:
            keys.setdefault(t.sort, set()).add(v)
    for (kind, name), table in model.tables.items():
        if kind != L.APP:
            continue
        for k, v in table.items():
            for rel in schema.catalog:
                if name.startswith(f"f_{rel.name}_") and k is not None:
                    keys.setdefault(rel.key_sort, set()).add(k)
    # foreign keys must land on rows, so close the key sets first
    changed = True
    while changed:
        changed = False
        for rel in schema.catalog:
            for a, srt in rel.attributes[1:]:
                if schema.keyed_by(srt) is None:
                    continue
                table = model.tables.get((L.APP, f"f_{rel.name}_{a}"), {})
                for k in keys.get(rel.key_sort, ()):
                    v = table.get(k)
                    if v is None:
                        if not keys.get(srt):
                            keys.setdefault(srt, set()).add(f"{srt}!w")
                            changed = True
                    elif v not in keys.setdefault(srt, set()):
                        keys[srt].add(v)
                        changed = True
    out = {}
    for rel in schema.catalog:
        rows = []
        for k in sorted(keys.get(rel.key_sort, ()), key=repr):
            row = [k]
            for a, srt in rel.attributes[1:]:
                v = model.tables.get((L.APP, f"f_{rel.name}_{a}"), {}).get(k)
                if v is None:
                    v = _filler(schema, srt, keys)
                row.append(v)
            rows.append(row)
        out[rel.name] = rows
    return out


def _filler(schema, srt: str, keys: dict):
    d = schema.sort(srt).domain
    if schema.keyed_by(srt) is not None:
        return sorted(keys[srt], key=repr)[0]
    if d.is_finite:
        return d.elements()[0]
    return f"{srt}!w"


def _pools(ts: TransitionSystem, model, instance: dict, witnesses: list) -> dict:
    schema = ts.dab.schema
    pools: dict = {}
    for sort, vals in model.carriers.items():
        if schema.has_sort(sort) and not schema.sort(sort).domain.is_finite and schema.keyed_by(sort) is None:
            pools[sort] = sorted((v for v in vals if v is not None), key=repr)
    for s in schema.sorts:
        if not s.domain.is_finite and schema.keyed_by(s.name) is None:
            pools.setdefault(s.name, [f"{s.name}!w"])
    return pools


def build_witness(ts: TransitionSystem, rules: list, target: StateFormula) -> Optional[Witness]:
    unr = _Unroller(ts)
    got = unr.run(rules, target)
    if got is None:
        return None
    model, wits, f = got
    instance = _catalog(ts, model, f)
    steps = []
    for name, w in zip(rules, wits):
        b = []
        for n, t in w.items():
            try:
                b.append((n, model.value(t)))
            except KeyError:
                b.append((n, None))
        steps.append(Step(ts.rule(name).base, tuple(b)))
    return Witness(instance, steps, _pools(ts, model, instance, wits))


def check_witness(ts: TransitionSystem, w: Witness, goal, cap: Optional[int] = None):
    """Replay a witness in the interpreter; returns the final snapshot or raises ReplayError."""
    cfg = ExplorationConfig(repo_cap=cap if cap is not None else max(len(w.steps), 1),
                            fresh_pool=w.pools, options=tuple(sorted(ts.options)))
    try:
        return replay(w.steps, ts.dab, w.instance, cfg, goal)
    except ReplayError:
        # the model may pick values the interpreter would not distinguish;
        # fall back to searching bindings along the named steps
        return replay([s.name for s in w.steps], ts.dab, w.instance, cfg, goal)
