"""Explicit-state execution of a DAB over a concrete catalog instance.

Snapshots are immutable.  Steps carry the name of the symbolic rule they
correspond to (``<Block>.T<k>``) and the chosen guard answer, so traces from
the symbolic engine and from breadth-first exploration can be replayed here.
"""
from __future__ import annotations

import itertools
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Optional

from . import blocks as B
from . import query as Q
from . import updates as U
from .model import DAB
from .schema import DataSchema

NSEQ, ERREVENT = "nseq", "errevent"

REACHABLE = "Reachable"
NOT_REACHABLE = "NotReachableWithinBounds"
EXHAUSTED = "Exhausted"


class InstanceError(ValueError):
    pass


class StepError(ValueError):
    pass


class ReplayError(ValueError):
    def __init__(self, index: int, message: str):
        super().__init__(f"step {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class Step:
    name: str
    binding: tuple = ()  # ((var, value), ...)

    def show(self) -> str:
        if not self.binding:
            return self.name
        return f"{self.name}[" + ", ".join(f"{k}={_fmt(v)}" for k, v in self.binding) + "]"

    def to_json(self) -> dict:
        return {"step": self.name, "binding": {k: v for k, v in self.binding}}


def _fmt(v) -> str:
    return "undef" if v is None else str(v)


@dataclass(frozen=True)
class Snapshot:
    catalog: tuple  # ((relation, (row, ...)), ...)
    repo: tuple = ()  # ((id, relation, row), ...)
    vars: tuple = ()  # ((name, value), ...) case, hidden, flag and control variables
    next_id: int = 0

    def value(self, name: str):
        for n, v in self.vars:
            if n == name:
                return v
        raise KeyError(name)

    @property
    def env(self) -> dict:
        return dict(self.vars)

    def rows(self, relation: str) -> list:
        for r, rows in self.catalog:
            if r == relation:
                return list(rows)
        return [row for _, rel, row in self.repo if rel == relation]

    def count(self, relation: str) -> int:
        return sum(1 for _, rel, _ in self.repo if rel == relation)

    @property
    def case_assignment(self) -> dict:
        return {n: v for n, v in self.vars if not n.endswith(Q.CONTROL_SUFFIX)}

    @property
    def control_assignment(self) -> dict:
        return {n[: -len(Q.CONTROL_SUFFIX)]: v for n, v in self.vars if n.endswith(Q.CONTROL_SUFFIX)}

    def key(self) -> tuple:
        return (tuple(sorted(((rel, row) for _, rel, row in self.repo), key=repr)), self.vars)

    def to_json(self) -> dict:
        repo: dict = {}
        for i, rel, row in self.repo:
            repo.setdefault(rel, []).append({"id": i, "row": list(row)})
        return {"repo": repo, "vars": {n: v for n, v in self.vars}}

    def show(self) -> str:
        lines = []
        for n, v in self.vars:
            lines.append(f"  {n} = {_fmt(v)}")
        for i, rel, row in self.repo:
            lines.append(f"  {rel}#{i}({', '.join(map(_fmt, row))})")
        return "\n".join(lines)


@dataclass(frozen=True)
class ExplorationConfig:
    repo_cap: int = 3
    fresh_pool: dict = field(default_factory=dict)  # sort -> values for unbounded sorts
    max_states: int = 100_000
    seed: int = 0
    options: tuple = ()


@dataclass
class ReachResult:
    status: str
    trace: list = field(default_factory=list)
    states: int = 0
    final: Optional[Snapshot] = None

    def to_json(self) -> dict:
        return {"formatVersion": 1, "result": self.status, "states": self.states,
                "trace": [s.to_json() for s in self.trace]}


def _with(s: Snapshot, sets: dict, repo=None, next_id=None) -> Snapshot:
    if not sets and repo is None:
        return s
    vs = tuple((n, sets.get(n, v)) for n, v in s.vars)
    return Snapshot(s.catalog, s.repo if repo is None else repo, vs, s.next_id if next_id is None else next_id)


def _instance_rows(instance: dict, schema: DataSchema) -> tuple:
    out = []
    for r in schema.catalog:
        rows = instance.get(r.name, [])
        out.append((r.name, tuple(sorted((tuple(x) for x in rows), key=repr))))
    return tuple(out)


def check_instance(instance: dict, schema: DataSchema) -> None:
    """Reject instances breaking sorts, primary keys or foreign keys."""
    keys = {}
    for r in schema.catalog:
        rows = [tuple(x) for x in instance.get(r.name, [])]
        ks = [row[0] for row in rows]
        if len(set(ks)) != len(ks):
            raise InstanceError(f"{r.name}: duplicate primary key")
        for row in rows:
            if len(row) != r.arity:
                raise InstanceError(f"{r.name}: row {list(row)} has arity {len(row)}, expected {r.arity}")
            for v, (a, srt) in zip(row, r.attributes):
                if v is None:
                    raise InstanceError(f"{r.name}.{a}: catalog values must be defined")
                if not schema.sort(srt).domain.contains(v):
                    raise InstanceError(f"{r.name}.{a}: {v!r} is not a value of {srt}")
        keys[r.key_sort] = set(ks)
    for name in instance:
        if not schema.is_catalog(name):
            raise InstanceError(f"unknown catalog relation {name}")
    for r in schema.catalog:
        for row in instance.get(r.name, []):
            for v, (a, srt) in zip(row[1:], r.attributes[1:]):
                if srt in keys and v not in keys[srt]:
                    raise InstanceError(f"{r.name}.{a}: foreign key {v!r} has no {srt} row")


def initial_snapshot(dab: DAB, instance: Optional[dict] = None) -> Snapshot:
    instance = instance or {}
    check_instance(instance, dab.schema)
    vs = {}
    for v in dab.schema.case_vars:
        vs[v.name] = None
    for b in B.walk(dab.root):
        if b.kind == B.TASK and not b.atomic and b.spec is not None:
            for n, _ in b.spec.pre.answer + b.spec.inputs:
                vs[f"{b.name}.{n}"] = None
        if b.kind == B.NONINTERRUPTING:
            vs[f"{b.name}.flag"] = "false"
    for c in B.control_variables(dab.root):
        vs[c] = B.IDLE
    vs[dab.root.control] = B.ENABLED
    return Snapshot(_instance_rows(instance, dab.schema), (), tuple(sorted(vs.items())), 0)


class Interpreter:
    def __init__(self, dab: DAB, instance: Optional[dict] = None, cfg: Optional[ExplorationConfig] = None):
        self.dab = dab
        self.schema = dab.schema
        self.cfg = cfg or ExplorationConfig()
        self.instance = instance or {}
        self.options = frozenset(o.lower() for o in self.cfg.options)
        self.par = B.parents(dab.root)
        self.init = initial_snapshot(dab, self.instance)
        self.domains = self._domains()
        self.blocks = self._plan()

    # -- domains ----------------------------------------------------------
    def _domains(self) -> dict:
        out = {}
        for s in self.schema.sorts:
            if s.domain.is_finite:
                out[s.name] = list(s.domain.elements())
                continue
            rel = self.schema.keyed_by(s.name)
            if rel is not None:
                out[s.name] = sorted({row[0] for row in self.instance.get(rel.name, [])}, key=repr)
                continue
            vals = list(self.cfg.fresh_pool.get(s.name, [f"{s.name}_{k}" for k in (1, 2)]))
            for r in self.schema.catalog:
                for row in self.instance.get(r.name, []):
                    for v, (_, srt) in zip(row, r.attributes):
                        if srt == s.name and v not in vals:
                            vals.append(v)
            out[s.name] = vals
        return out

    def domain(self, sort: str) -> list:
        return self.domains.get(sort, [])

    # -- queries ----------------------------------------------------------
    def _val(self, t, s: Snapshot, env: dict, binding: dict):
        if isinstance(t, Q.Const):
            return t.value
        if isinstance(t, Q.Undef):
            return None
        if isinstance(t, Q.CaseVar):
            return env[t.name]
        return binding[t.name]

    def _holds(self, a, s: Snapshot, env: dict, bnd: dict) -> bool:
        if isinstance(a, Q.Eq):
            return self._val(a.left, s, env, bnd) == self._val(a.right, s, env, bnd)
        if isinstance(a, Q.Neq):
            return self._val(a.left, s, env, bnd) != self._val(a.right, s, env, bnd)
        if isinstance(a, Q.Cmp):
            x, y = self._val(a.left, s, env, bnd), self._val(a.right, s, env, bnd)
            if x is None or y is None:
                return False
            return {"<": x < y, "<=": x <= y, ">": x > y, ">=": x >= y}[a.op]
        row = tuple(self._val(t, s, env, bnd) for t in a.args)
        present = row in s.rows(a.relation)
        return present == a.positive

    def eval_cq(self, q: Q.ConjQuery, s: Snapshot, fixed: Optional[dict] = None, extra=(),
                proper: bool = True) -> Iterator[dict]:
        """All total bindings of the query's variables (and `extra`) satisfying it."""
        env = s.env
        fixed = dict(fixed or {})
        sorts = {}
        for v in Q.cq_vars(q):
            sorts[v.name] = v.sort
        for n, srt in extra:
            sorts.setdefault(n, srt)
        anchored = {t.name for a in q.atoms if isinstance(a, Q.Rel) and a.positive
                    for t in a.args if isinstance(t, Q.Var)}
        rels = [a for a in q.atoms if isinstance(a, Q.Rel) and a.positive]
        others = [a for a in q.atoms if not (isinstance(a, Q.Rel) and a.positive)]

        def unify(args, row, bnd):
            b2 = dict(bnd)
            for t, v in zip(args, row):
                if isinstance(t, Q.Var):
                    if t.name in b2:
                        if b2[t.name] != v:
                            return None
                    else:
                        b2[t.name] = v
                elif self._val(t, s, env, b2) != v:
                    return None
            return b2

        def join(k, bnd):
            if k == len(rels):
                yield bnd
                return
            a = rels[k]
            for row in s.rows(a.relation):
                b2 = unify(a.args, row, bnd)
                if b2 is not None:
                    yield from join(k + 1, b2)

        seen = set()
        for bnd in join(0, fixed):
            free = [n for n in sorts if n not in bnd]
            # equalities with an evaluable side fix a variable
            changed = True
            while changed and free:
                changed = False
                for a in others:
                    if isinstance(a, Q.Eq):
                        for x, y in ((a.left, a.right), (a.right, a.left)):
                            if isinstance(x, Q.Var) and x.name in free and (
                                    not isinstance(y, Q.Var) or y.name in bnd):
                                bnd = dict(bnd)
                                bnd[x.name] = self._val(y, s, env, bnd)
                                free.remove(x.name)
                                changed = True
                                break
            pools = []
            for n in free:
                vals = list(self.domain(sorts[n]))
                if not proper or n in anchored:
                    vals.append(None)
                pools.append(vals)
            for combo in itertools.product(*pools):
                b2 = dict(bnd)
                b2.update(zip(free, combo))
                if proper and any(b2[n] is None for n in sorts if n not in anchored and n not in fixed):
                    continue
                if all(self._holds(a, s, env, b2) for a in others):
                    key = tuple(sorted(b2.items(), key=lambda kv: kv[0]))
                    if key not in seen:
                        seen.add(key)
                        yield b2

    def holds(self, g: Optional[Q.Guard], s: Snapshot) -> bool:
        if g is None:
            return True
        for q in g.disjuncts:
            for _ in self.eval_cq(q, s):
                return True
        return False

    def evaluate_guard(self, g: Q.Guard, s: Snapshot, extra=()) -> list:
        """Answers of a guard as a sorted list of binding tuples over answer and extra variables."""
        names = [n for n, _ in g.answer] + [n for n, _ in extra]
        out = set()
        for q in g.disjuncts:
            for bnd in self.eval_cq(q, s, extra=tuple(g.answer) + tuple(extra)):
                out.add(tuple((n, bnd[n]) for n in names))
        return sorted(out, key=repr)

    # -- effects ----------------------------------------------------------
    def _term(self, t, env: dict, bnd: dict):
        if isinstance(t, Q.Const):
            return t.value
        if isinstance(t, Q.Undef):
            return None
        if isinstance(t, Q.CaseVar):
            return env[t.name]
        return bnd[t.name]

    def _effect(self, u: U.UpdateSpec, s: Snapshot, bnd: dict, guard_rows: dict) -> Optional[Snapshot]:
        env = s.env
        eff = u.eff
        sets = {n: self._term(t, env, bnd) for n, t in getattr(eff, "sets", ())}
        repo = list(s.repo)
        nid = s.next_id
        if isinstance(eff, U.InsertSet) and eff.relation is not None:
            row = tuple(self._term(t, env, bnd) for t in eff.tuple)
            if all(v is None for v in row):
                return _with(s, sets)
            if s.count(eff.relation) >= self.cfg.repo_cap:
                return None
            if self.dab.semantics.mode == U.SET:
                key = self.dab.semantics.key_of(self.schema, eff.relation)
                repo = [(i, rel, r) for i, rel, r in repo
                        if not (rel == eff.relation and all(r[k] == row[k] for k in key))]
            repo.append((nid, eff.relation, row))
            nid += 1
        elif isinstance(eff, U.DeleteSet):
            row = tuple(self._term(t, env, bnd) for t in eff.tuple)
            if all(v is None for v in row):
                return None
            hit = None
            for k, (i, rel, r) in enumerate(repo):
                if rel == eff.relation and r == row:
                    hit = k
                    break
            if hit is None:
                return None
            del repo[hit]
        elif isinstance(eff, U.CondUpdate):
            new = []
            for i, rel, r in repo:
                if rel != eff.relation:
                    new.append((i, rel, r))
                    continue
                rb = dict(bnd)
                rb.update({n: v for (n, _), v in zip(eff.row_vars, r)})
                node = eff.tree
                while isinstance(node, U.IfNode):
                    ok = any(True for q in node.filter.disjuncts
                             for _ in self.eval_cq(q, s, rb, proper=False))
                    node = node.then if ok else node.orelse
                r2 = tuple(self._term(t, env, rb) for t in node.terms)
                if any(v is not None for v in r2):
                    new.append((i, rel, r2))
            repo = new
        return _with(s, sets, tuple(repo), nid)

    def _spec_moves(self, u: Optional[U.UpdateSpec], s: Snapshot):
        """(binding, successor-builder) pairs for a spec; successor None when blocked."""
        if u is None:
            yield (), s
            return
        extra = tuple(u.pre.answer) + tuple(u.inputs)
        names = [n for n, _ in extra]
        seen = set()
        for q in u.pre.disjuncts:
            for bnd in self.eval_cq(q, s, extra=extra):
                b = tuple((n, bnd[n]) for n in names)
                r = self._effect(u, s, bnd, {})
                if r is None:
                    continue
                k = (b, r.key())
                if k in seen:
                    continue
                seen.add(k)
                yield b, r

    # -- blocks -----------------------------------------------------------
    def _plan(self) -> list:
        absorbed, fused = set(), set()
        order = []

        def visit(b):
            if b.name not in absorbed:
                if b.kind == B.SEQUENCE and NSEQ in self.options:
                    items = _flatten(b)
                    if len(items) > 2:
                        for c in _seq_nodes(b):
                            if c is not b:
                                absorbed.add(c.name)
                if b.kind == B.EVENT_CHOICE and ERREVENT in self.options:
                    b2 = b.child("b2")
                    if B.always_error(b2) and B.error_catcher(self.dab.root, b2) is not None:
                        fused.update({b.child("e1").name, b.child("e2").name, b2.name})
                order.append(b)
            for c in b.subblocks:
                visit(c)

        visit(self.dab.root)
        self.absorbed, self.fused = absorbed, fused
        return [b for b in order if b.name not in absorbed]

    def moves(self, s: Snapshot) -> Iterator[tuple]:
        """Enabled steps with their successors, in a fixed order."""
        env = s.env
        for b in self.blocks:
            for name, b2, r in self._block_moves(b, s, env):
                yield Step(name, b2), r

    def _block_moves(self, b: B.Block, s: Snapshot, env: dict):
        st = lambda x: env[x.control]
        nm = lambda k: f"{b.name}.T{k}"

        def enable(c):
            return B.COMPLETED if c.kind == B.EMPTY else B.ENABLED

        def ctl(k, cond, sets, spec=None):
            if not cond:
                return
            for bnd, r in self._spec_moves(spec, s):
                yield nm(k), bnd, _with(r, {c.control if isinstance(c, B.Block) else c: v for c, v in sets})

        def error_to(catcher_a, extra=()):
            sets = [(d, B.IDLE) for d in B.descendants(catcher_a)]
            sets += list(extra)
            sets.append((catcher_a, B.ERR))
            return sets

        k = b.kind
        if k == B.TASK:
            if b.atomic:
                yield from ctl(1, st(b) == B.ENABLED, [(b, B.COMPLETED)], b.spec)
            else:
                u = b.spec
                if st(b) == B.ENABLED:
                    for bnd, _ in self._spec_moves(U.UpdateSpec(u.name, u.pre, U.InsertSet(), u.inputs), s):
                        sets = {f"{b.name}.{n}": v for n, v in bnd}
                        sets[b.control] = B.ACTIVE
                        yield nm(1), bnd, _with(s, sets)
                if st(b) == B.ACTIVE:
                    bnd = {n: env[f"{b.name}.{n}"] for n, _ in u.pre.answer + u.inputs}
                    r = self._effect(u, s, bnd, {})
                    if r is not None:
                        yield nm(2), (), _with(r, {b.control: B.COMPLETED})
        elif k == B.EVENT:
            if b.name not in self.fused:
                yield from ctl(1, st(b) == B.ENABLED, [(b, B.COMPLETED)], b.spec)
        elif k in (B.PROCESS, B.SUBPROCESS):
            inner = b.child("inner")
            yield from ctl(1, st(b) == B.ENABLED, [(inner, enable(inner)), (b, B.WAITING)],
                           b.start_spec if k == B.PROCESS else None)
            yield from ctl(2, st(inner) == B.COMPLETED, [(inner, B.IDLE), (b, B.COMPLETED)],
                           b.end_spec if k == B.PROCESS else None)
        elif k == B.SEQUENCE:
            items = _flatten(b) if NSEQ in self.options else []
            if len(items) <= 2:
                items = [b.child("b1"), b.child("b2")]
            yield from ctl(1, st(b) == B.ENABLED, [(items[0], enable(items[0])), (b, B.WAITING)])
            for i in range(len(items) - 1):
                yield from ctl(i + 2, st(items[i]) == B.COMPLETED,
                               [(items[i], B.IDLE), (items[i + 1], enable(items[i + 1]))])
            last = items[-1]
            yield from ctl(len(items) + 1, st(last) == B.COMPLETED, [(last, B.IDLE), (b, B.COMPLETED)])
        elif k == B.POSSIBLE:
            if b.name in self.fused:
                return
            inner = b.child("inner") if b.has("inner") else None
            if inner is not None:
                yield from ctl(1, st(b) == B.ENABLED, [(inner, enable(inner)), (b, B.WAITING)])
                done = st(inner) == B.COMPLETED
                reset = [(inner, B.IDLE)]
            else:
                yield from ctl(1, st(b) == B.ENABLED, [(b, B.WAITING)])
                done = st(b) == B.WAITING
                reset = []
            if done:
                p1 = self.holds(b.phi1, s)
                p2 = self.holds(b.phi2, s) if b.phi2 is not None else not p1
                yield from ctl(2, p1, reset + [(b, B.COMPLETED)])
                if b.end_type == B.ERROR:
                    a = B.error_catcher(self.dab.root, b).child("a")
                    yield from ctl(3, p2, error_to(a, reset))
                else:
                    yield from ctl(3, p2, reset + [(b, B.COMPLETED)])
        elif k == B.GATEWAY:
            b1, b2 = b.child("b1"), b.child("b2")
            if b.gtype == "parallel":
                yield from ctl(1, st(b) == B.ENABLED, [(b1, enable(b1)), (b2, enable(b2)), (b, B.WAITING)])
                yield from ctl(2, st(b1) == B.COMPLETED and st(b2) == B.COMPLETED,
                               [(b1, B.IDLE), (b2, B.IDLE), (b, B.COMPLETED)])
            else:
                yield from ctl(1, st(b) == B.ENABLED, [(b1, enable(b1)), (b, B.WAITING)])
                yield from ctl(2, st(b) == B.ENABLED, [(b2, enable(b2)), (b, B.WAITING)])
                yield from ctl(3, st(b1) == B.COMPLETED, [(b1, B.IDLE), (b, B.COMPLETED)])
                yield from ctl(4, st(b2) == B.COMPLETED, [(b2, B.IDLE), (b, B.COMPLETED)])
        elif k == B.CHOICE:
            b1, b2 = b.child("b1"), b.child("b2")
            en = st(b) == B.ENABLED
            p1 = en and self.holds(b.phi1, s)
            p2 = en and (self.holds(b.phi2, s) if b.phi2 is not None else not self.holds(b.phi1, s))
            if b.gtype == "inclusive":
                yield from ctl(1, p1 and not p2, [(b1, enable(b1)), (b, B.WAITING1)])
                yield from ctl(2, p2 and not p1, [(b2, enable(b2)), (b, B.WAITING1)])
                yield from ctl(3, p1 and p2, [(b1, enable(b1)), (b2, enable(b2)), (b, B.WAITING2)])
                yield from ctl(4, st(b1) == B.COMPLETED and st(b) == B.WAITING1, [(b1, B.IDLE), (b, B.COMPLETED)])
                yield from ctl(5, st(b) == B.WAITING1 and st(b2) == B.COMPLETED, [(b2, B.IDLE), (b, B.COMPLETED)])
                yield from ctl(6, st(b1) == B.COMPLETED and st(b2) == B.COMPLETED,
                               [(b1, B.IDLE), (b2, B.IDLE), (b, B.COMPLETED)])
            else:
                yield from ctl(1, p1, [(b1, enable(b1)), (b, B.WAITING)])
                yield from ctl(2, p2, [(b2, enable(b2)), (b, B.WAITING)])
                yield from ctl(3, st(b1) == B.COMPLETED, [(b1, B.IDLE), (b, B.COMPLETED)])
                yield from ctl(4, st(b2) == B.COMPLETED, [(b2, B.IDLE), (b, B.COMPLETED)])
        elif k == B.LOOP:
            b1, b2 = b.child("b1"), b.child("b2")
            yield from ctl(1, st(b) == B.ENABLED, [(b1, enable(b1)), (b, B.WAITING)])
            if st(b1) == B.COMPLETED:
                p1 = self.holds(b.phi1, s)
                p2 = self.holds(b.phi2, s) if b.phi2 is not None else not p1
                yield from ctl(2, p1, [(b1, B.IDLE), (b2, enable(b2))])
            yield from ctl(3, st(b2) == B.COMPLETED, [(b1, enable(b1)), (b2, B.IDLE)])
            if st(b1) == B.COMPLETED:
                yield from ctl(4, p2, [(b1, B.IDLE), (b, B.COMPLETED)])
        elif k == B.EVENT_CHOICE:
            e1, e2, b1, b2 = (b.child(r) for r in ("e1", "e2", "b1", "b2"))
            fuse = e1.name in self.fused
            yield from ctl(1, st(b) == B.ENABLED, [(e1, enable(e1)), (b, B.WAITING)])
            if not fuse:
                yield from ctl(2, st(b) == B.ENABLED, [(e2, enable(e2)), (b, B.WAITING)])
            yield from ctl(3, st(e1) == B.COMPLETED, [(e1, B.IDLE), (b1, enable(b1))])
            if not fuse:
                yield from ctl(4, st(e2) == B.COMPLETED, [(e2, B.IDLE), (b2, enable(b2))])
            yield from ctl(5, st(b1) == B.COMPLETED, [(b1, B.IDLE), (b, B.COMPLETED)])
            if not fuse:
                yield from ctl(6, st(b2) == B.COMPLETED, [(b2, B.IDLE), (b, B.COMPLETED)])
            else:
                yield from ctl("E1", st(e1) == B.ENABLED, [(e1, B.COMPLETED)], e1.spec)
                a = B.error_catcher(self.dab.root, b2).child("a")
                yield from ctl("E2", st(e1) == B.ENABLED, error_to(a, [(e1, B.IDLE)]), e2.spec)
        elif k in B.EXCEPTION_KINDS:
            a, h = b.child("a"), b.child("handler")
            yield from ctl(1, st(b) == B.ENABLED, [(a, enable(a)), (b, B.WAITING)])
            if k == B.BACKWARD:
                yield from ctl(2, st(a) == B.COMPLETED, [(a, B.IDLE), (b, B.COMPLETED)])
                yield from ctl(3, st(a) == B.ERR, [(a, B.IDLE), (h, enable(h))])
            elif k == B.FORWARD:
                b1 = b.child("b1")
                yield from ctl(2, st(a) == B.COMPLETED, [(a, B.IDLE), (b1, enable(b1))])
                yield from ctl(3, st(b1) == B.COMPLETED, [(b1, B.IDLE), (b, B.COMPLETED)])
                yield from ctl(4, st(a) == B.ERR, [(a, B.IDLE), (h, enable(h))])
                yield from ctl(5, st(h) == B.COMPLETED, [(h, B.IDLE), (b, B.COMPLETED)])
            else:
                fl = f"{b.name}.flag"
                yield from ctl(2, st(a) == B.COMPLETED and env[fl] == "false", [(a, B.IDLE), (b, B.COMPLETED)])
                yield from ctl(3, st(a) == B.ERR, [(h, enable(h)), (fl, "true")])
                yield from ctl(4, st(a) == B.COMPLETED and st(h) == B.COMPLETED,
                               [(a, B.IDLE), (h, B.IDLE), (b, B.COMPLETED)])
            if b.event_type in (B.MSG, B.TIMER):
                for i, x in enumerate((B.ENABLED, B.WAITING, B.ACTIVE), 1):
                    yield from ctl(f"err{i}", st(a) == x, error_to(a))

    # -- public helpers -----------------------------------------------------
    def enabled_steps(self, s: Snapshot) -> list:
        return [st for st, _ in self.moves(s)]

    def apply_step(self, s: Snapshot, step: Step) -> Snapshot:
        for st, r in self.moves(s):
            if st == step:
                return r
        raise StepError(f"step {step.show()} is not enabled")

    def satisfies(self, g: Q.Guard, s: Snapshot) -> bool:
        return self.holds(g, s)


def _seq_nodes(b: B.Block) -> list:
    out = [b]
    for c in (b.child("b1"), b.child("b2")):
        if c.kind == B.SEQUENCE:
            out.extend(_seq_nodes(c))
    return out


def _flatten(b: B.Block) -> list:
    out = []
    for c in (b.child("b1"), b.child("b2")):
        if c.kind == B.SEQUENCE:
            out.extend(_flatten(c))
        else:
            out.append(c)
    return out


# -- module-level API ----------------------------------------------------------

def enabled_steps(it: Interpreter, s: Snapshot) -> list:
    return it.enabled_steps(s)


def apply_step(it: Interpreter, s: Snapshot, step: Step) -> Snapshot:
    return it.apply_step(s, step)


def evaluate_guard(it: Interpreter, g: Q.Guard, s: Snapshot) -> list:
    return it.evaluate_guard(g, s)


def explicit_reach(dab: DAB, instance: Optional[dict], prop: Q.Guard,
                   cfg: Optional[ExplorationConfig] = None) -> ReachResult:
    """Breadth-first search for a snapshot satisfying `prop`."""
    cfg = cfg or ExplorationConfig()
    it = Interpreter(dab, instance, cfg)
    s0 = it.init
    if cfg.max_states <= 0:
        return ReachResult(EXHAUSTED, states=0)
    parent: dict = {s0.key(): None}
    queue = deque([s0])
    while queue:
        s = queue.popleft()
        if it.holds(prop, s):
            return ReachResult(REACHABLE, _path(parent, s.key()), len(parent), s)
        for step, r in it.moves(s):
            k = r.key()
            if k in parent:
                continue
            if len(parent) >= cfg.max_states:
                return ReachResult(EXHAUSTED, states=len(parent))
            parent[k] = (s.key(), step)
            queue.append(r)
    return ReachResult(NOT_REACHABLE, states=len(parent))


def _path(parent: dict, k) -> list:
    out = []
    while parent[k] is not None:
        k, step = parent[k]
        out.append(step)
    return out[::-1]


def replay(trace: list, dab: DAB, instance: Optional[dict] = None,
           cfg: Optional[ExplorationConfig] = None, goal: Optional[Q.Guard] = None) -> Snapshot:
    """Run a trace of Steps, or of bare step names whose bindings are searched for.

    With bare names the search backtracks over bindings, and with `goal`
    the final snapshot must also satisfy it.
    """
    it = Interpreter(dab, instance, cfg)
    items = [t if isinstance(t, Step) else Step(_base(t)) for t in trace]
    best = [0]

    def go(i: int, s: Snapshot, seen: set):
        if i == len(items):
            if goal is None or it.holds(goal, s):
                return s
            return None
        want = items[i]
        cands = []
        for st, r in it.moves(s):
            if st.name != _base(want.name):
                continue
            if want.binding and st.binding != want.binding:
                continue
            cands.append(r)
        if not cands:
            best[0] = max(best[0], i)
            return None
        for r in cands:
            k = (i, r.key())
            if k in seen:
                continue
            seen.add(k)
            out = go(i + 1, r, seen)
            if out is not None:
                return out
        best[0] = max(best[0], i + 1 if i + 1 == len(items) else i)
        return None

    import sys
    sys.setrecursionlimit(max(1000, 4 * len(items) + 200))
    out = go(0, it.init, set())
    if out is None:
        i = best[0]
        if i >= len(items):
            raise ReplayError(len(items), "final snapshot does not satisfy the property")
        raise ReplayError(i, f"{items[i].show()} is not applicable")
    return out


def _base(name: str) -> str:
    parts = name.split(".")
    if len(parts) > 2 and parts[-1].startswith("d") and parts[-1][1:].isdigit():
        return ".".join(parts[:-1])
    return name


def simulate(dab: DAB, instance: Optional[dict], steps: int, seed: int = 0,
             cfg: Optional[ExplorationConfig] = None) -> tuple:
    """A random run of at most `steps` steps; returns (trace, final snapshot)."""
    it = Interpreter(dab, instance, cfg)
    rng = random.Random(seed)
    s = it.init
    trace = []
    for _ in range(steps):
        ms = list(it.moves(s))
        if not ms:
            break
        st, s = ms[rng.randrange(len(ms))]
        trace.append(st)
    return trace, s
