"""Built-in decision procedure for the ground fragment.

Congruence closure over unary catalog functions and array reads, the undef
biconditional for catalog functions (x = undef iff f(x) = undef), finite and
bounded-ordinal domains with order comparisons, and a small DPLL-style case
split over disjunctions.  Sorts without a declared domain are infinite, so
any set of disequalities among their classes is satisfiable with fresh
elements.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .. import logic as L

SAT, UNSAT, UNKNOWN = "sat", "unsat", "unknown"


@dataclass
class Model:
    assign: dict = field(default_factory=dict)  # leaf term -> value
    tables: dict = field(default_factory=dict)  # (kind, name) -> {arg value: value}
    carriers: dict = field(default_factory=dict)  # sort -> set of values used

    def value(self, t: L.Term):
        if t.kind == L.CONST:
            return t.name
        if t.arg is None:
            if t not in self.assign:
                raise KeyError(f"model has no value for {t!r}")
            return self.assign[t]
        a = self.value(t.arg)
        if t.kind == L.APP and a is None:
            return None
        table = self.tables.get((t.kind, t.name), {})
        if a not in table:
            raise KeyError(f"model has no value for {t!r}")
        return table[a]


@dataclass
class SatResult:
    status: str
    model: Optional[Model] = None
    reason: str = ""

    @property
    def sat(self) -> bool:
        return self.status == SAT

    @property
    def unsat(self) -> bool:
        return self.status == UNSAT


class SolverError(Exception):
    pass


def eval_lit(model: Model, l) -> bool:
    a = model.value(l[1])
    b = model.value(l[2])
    op = l[0]
    if op == L.EQ:
        return a == b
    if op == L.NE:
        return a != b
    return L._cmp_value(op, a, b)


def eval_model(model: Model, f) -> bool:
    if f == L.TRUE:
        return True
    if f == L.FALSE:
        return False
    if len(f) == 3:
        return eval_lit(model, f)
    if f[0] == "and":
        return all(eval_model(model, p) for p in f[1])
    if f[0] == "or":
        return any(eval_model(model, p) for p in f[1])
    if f[0] == "not":
        return not eval_model(model, f[1])
    raise ValueError(f"bad formula {f!r}")


class _Conflict(Exception):
    pass


class _Budget(Exception):
    pass


class _Problem:
    """Static per-query data: the term universe with integer ids."""

    def __init__(self, sig: L.Signature, terms: set):
        self.sig = sig
        ordered = sorted(terms, key=lambda t: (t.depth, t.key))
        undefs = {}
        extra = []
        for t in ordered:
            if t.kind == L.APP:
                for s in (t.sort, t.arg.sort):
                    u = L.undef(s)
                    if u not in terms:
                        extra.append(u)
        for u in extra:
            if u not in terms:
                terms = set(terms) | {u}
        ordered = sorted(terms, key=lambda t: (t.depth, t.key))
        self.terms = ordered
        self.id = {t: i for i, t in enumerate(ordered)}
        n = len(ordered)
        self.dom0: list = [None] * n
        self.arg: list = [-1] * n
        self.fkey: list = [None] * n
        self.axiom_pairs = []
        for i, t in enumerate(ordered):
            info = sig.sorts.get(t.sort)
            if info is not None and info.finite:
                self.dom0[i] = frozenset(info.carrier())
            if t.arg is not None:
                self.arg[i] = self.id[t.arg]
                self.fkey[i] = (t.kind, t.name)
                if t.kind == L.APP:
                    self.axiom_pairs.append((self.id[t.arg], i))
            if t.kind == L.CONST and t.name is not None and info is not None and info.finite:
                if t.name not in info.values:
                    raise SolverError(f"constant {t.name!r} outside the domain of {t.sort}")
            if t.kind == L.CONST and t.name is None:
                undefs[t.sort] = i
        self.undef_of = undefs
        self.sort = [t.sort for t in ordered]
        self.finite = [d is not None for d in self.dom0]


class _State:
    __slots__ = ("p", "parent", "val", "dom", "diseq", "nonundef", "uses", "sigt", "cmps", "valroot", "queue")

    def __init__(self, p: _Problem):
        self.p = p
        n = len(p.terms)
        self.parent = list(range(n))
        self.val = {}
        self.dom = {}
        self.diseq = []
        self.nonundef = set()
        self.uses = {}
        self.sigt = {}
        self.cmps = []
        self.valroot = {}
        self.queue = []
        for i, t in enumerate(p.terms):
            if t.kind == L.CONST:
                self.val[i] = t.name
                if p.finite[i]:
                    self.dom[i] = frozenset([t.name])
                key = (t.sort, t.name)
                if key in self.valroot:
                    self.queue.append((i, self.valroot[key]))
                else:
                    self.valroot[key] = i
                if t.name is not None:
                    self.nonundef.add(i)
            elif p.finite[i]:
                self.dom[i] = p.dom0[i]
        for i in range(n):
            a = p.arg[i]
            if a >= 0:
                k = (p.fkey[i], self.find(a))
                if k in self.sigt:
                    self.queue.append((i, self.sigt[k]))
                else:
                    self.sigt[k] = i
                self.uses.setdefault(self.find(a), []).append(i)

    def copy(self) -> "_State":
        s = _State.__new__(_State)
        s.p = self.p
        s.parent = list(self.parent)
        s.val = dict(self.val)
        s.dom = dict(self.dom)
        s.diseq = list(self.diseq)
        s.nonundef = set(self.nonundef)
        s.uses = {k: list(v) for k, v in self.uses.items()}
        s.sigt = dict(self.sigt)
        s.cmps = list(self.cmps)
        s.valroot = dict(self.valroot)
        s.queue = list(self.queue)
        return s

    def find(self, i: int) -> int:
        parent = self.parent
        r = i
        while parent[r] != r:
            r = parent[r]
        while parent[i] != r:
            parent[i], i = r, parent[i]
        return r

    # -- basic operations ------------------------------------------------

    def _setval(self, r: int, v) -> None:
        old = self.val.get(r, _NOVAL)
        if old is not _NOVAL:
            if old != v:
                raise _Conflict
            return
        self.val[r] = v
        if self.p.finite[r]:
            d = self.dom.get(r)
            if d is not None and v not in d:
                raise _Conflict
            self.dom[r] = frozenset([v])
        if v is not None:
            self.nonundef.add(r)
        elif r in self.nonundef:
            raise _Conflict
        key = (self.p.sort[r], v)
        other = self.valroot.get(key)
        if other is None:
            self.valroot[key] = r
        else:
            o = self.find(other)
            if o != r:
                self.queue.append((r, o))
            self.valroot[key] = r

    def merge(self, a: int, b: int) -> None:
        self.queue.append((a, b))
        self._drain()

    def _drain(self) -> None:
        q = self.queue
        while q:
            a, b = q.pop()
            ra, rb = self.find(a), self.find(b)
            if ra == rb:
                continue
            ua = self.uses.get(ra, ())
            ub = self.uses.get(rb, ())
            if len(ua) > len(ub):
                ra, rb = rb, ra
                ua, ub = ub, ua
            # merge ra into rb
            va = self.val.get(ra, _NOVAL)
            vb = self.val.get(rb, _NOVAL)
            if va is not _NOVAL and vb is not _NOVAL and va != vb:
                raise _Conflict
            self.parent[ra] = rb
            if ra in self.nonundef:
                self.nonundef.add(rb)
            if self.p.finite[rb]:
                da = self.dom.get(ra)
                db = self.dom.get(rb)
                d = db if da is None else (da if db is None else da & db)
                if not d:
                    raise _Conflict
                if rb in self.nonundef and None in d:
                    d = d - {None}
                    if not d:
                        raise _Conflict
                self.dom[rb] = d
            if va is not _NOVAL and vb is _NOVAL:
                self._setval(rb, va)
            elif rb in self.nonundef and self.val.get(rb, _NOVAL) is None:
                raise _Conflict
            if self.p.finite[rb] and self.val.get(rb, _NOVAL) is _NOVAL and len(self.dom[rb]) == 1:
                self._setval(rb, next(iter(self.dom[rb])))
            if ua:
                lst = self.uses.setdefault(rb, [])
                for t in ua:
                    k = (self.p.fkey[t], rb)
                    o = self.sigt.get(k)
                    if o is None:
                        self.sigt[k] = t
                    elif self.find(o) != self.find(t):
                        q.append((t, o))
                    lst.append(t)
                del self.uses[ra]

    def restrict(self, r: int, d: frozenset) -> bool:
        """Intersect a finite class's domain; True if it shrank."""
        old = self.dom[r]
        new = old & d
        if new == old:
            return False
        if not new:
            raise _Conflict
        self.dom[r] = new
        if None not in new:
            self.nonundef.add(r)
        if len(new) == 1:
            self._setval(r, next(iter(new)))
            self._drain()
        return True

    def add_nonundef(self, i: int) -> bool:
        r = self.find(i)
        if r in self.nonundef:
            return False
        if self.val.get(r, _NOVAL) is None:
            raise _Conflict
        self.nonundef.add(r)
        if self.p.finite[r]:
            self.restrict(r, self.dom[r] - {None})
        return True

    def is_undef(self, r: int) -> bool:
        return self.val.get(r, _NOVAL) is None

    def diseq_known(self, ra: int, rb: int) -> bool:
        if ra == rb:
            return False
        va = self.val.get(ra, _NOVAL)
        vb = self.val.get(rb, _NOVAL)
        if va is not _NOVAL and vb is not _NOVAL:
            return va != vb
        if va is None and rb in self.nonundef or vb is None and ra in self.nonundef:
            return True
        if self.p.finite[ra]:
            if not (self.dom[ra] & self.dom[rb]):
                return True
        for x, y in self.diseq:
            fx, fy = self.find(x), self.find(y)
            if (fx == ra and fy == rb) or (fx == rb and fy == ra):
                return True
        return False

    def add_diseq(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            raise _Conflict
        va = self.val.get(ra, _NOVAL)
        vb = self.val.get(rb, _NOVAL)
        if va is None:
            self.add_nonundef(rb)
            return
        if vb is None:
            self.add_nonundef(ra)
            return
        if va is not _NOVAL and vb is not _NOVAL:
            return
        self.diseq.append((a, b))
        self._propagate()

    # -- propagation ----------------------------------------------------

    def _propagate(self) -> None:
        changed = True
        p = self.p
        while changed:
            changed = False
            self._drain()
            for a, b in self.diseq:
                ra, rb = self.find(a), self.find(b)
                if ra == rb:
                    raise _Conflict
                if p.finite[ra]:
                    va = self.val.get(ra, _NOVAL)
                    vb = self.val.get(rb, _NOVAL)
                    if va is not _NOVAL and vb is _NOVAL:
                        changed |= self.restrict(rb, self.dom[rb] - {va})
                    elif vb is not _NOVAL and va is _NOVAL:
                        changed |= self.restrict(ra, self.dom[ra] - {vb})
                else:
                    if self.val.get(ra, _NOVAL) is None:
                        changed |= self.add_nonundef(rb)
                    elif self.val.get(rb, _NOVAL) is None:
                        changed |= self.add_nonundef(ra)
            for a, t in p.axiom_pairs:
                ra, rt = self.find(a), self.find(t)
                if self.is_undef(ra):
                    if not self.is_undef(rt):
                        self.merge(rt, p.undef_of[p.sort[t]])
                        changed = True
                elif self.is_undef(rt):
                    self.merge(ra, p.undef_of[p.sort[a]])
                    changed = True
                elif ra in self.nonundef:
                    changed |= self.add_nonundef(rt)
                elif rt in self.nonundef:
                    changed |= self.add_nonundef(ra)
            for op, a, b in self.cmps:
                changed |= self._prop_cmp(op, a, b)

    def _prop_cmp(self, op: str, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        va = self.val.get(ra, _NOVAL)
        vb = self.val.get(rb, _NOVAL)
        if va is not _NOVAL and vb is not _NOVAL:
            if not L._cmp_value(op, va, vb):
                raise _Conflict
            return False
        if op in (L.LT, L.LE):
            ch = self.add_nonundef(a)
            ch |= self.add_nonundef(b)
            strict = op == L.LT
            ch |= self._bound(a, b, strict)
            return ch
        if va is None or vb is None:
            return False
        if ra in self.nonundef and rb in self.nonundef:
            # not (a < b) is b <= a; not (a <= b) is b < a
            return self._bound(b, a, op == L.NLE)
        return False

    def _bound(self, a: int, b: int, strict: bool) -> bool:
        """Narrow domains of proper a, b under a < b (or a <= b)."""
        ra = self.find(a)
        hi = max(v for v in self.dom[self.find(b)] if v is not None)
        ch = self.restrict(ra, frozenset(v for v in self.dom[ra] if v is not None and (v < hi if strict else v <= hi)))
        rb = self.find(b)
        lo = min(v for v in self.dom[self.find(a)] if v is not None)
        ch |= self.restrict(rb, frozenset(v for v in self.dom[rb] if v is not None and (v > lo if strict else v >= lo)))
        return ch

    # -- literals ---------------------------------------------------------

    def assert_lit(self, l) -> None:
        op = l[0]
        a = self.p.id[l[1]]
        b = self.p.id[l[2]]
        if op == L.EQ:
            self.merge(a, b)
            self._propagate()
        elif op == L.NE:
            self.add_diseq(a, b)
        else:
            self.cmps.append((op, a, b))
            self._propagate()

    def eval_lit(self, l) -> Optional[bool]:
        op = l[0]
        ra = self.find(self.p.id[l[1]])
        rb = self.find(self.p.id[l[2]])
        if op in (L.EQ, L.NE):
            if ra == rb:
                r = True
            elif self.diseq_known(ra, rb):
                r = False
            else:
                return None
            return r if op == L.EQ else not r
        va = self.val.get(ra, _NOVAL)
        vb = self.val.get(rb, _NOVAL)
        if va is not _NOVAL and vb is not _NOVAL:
            return L._cmp_value(op, va, vb)
        if va is None or vb is None:
            return op in (L.NLT, L.NLE)
        return None


class _NoVal:
    def __repr__(self) -> str:
        return "<noval>"


_NOVAL = _NoVal()


def _eval_formula(st: _State, f) -> Optional[bool]:
    if len(f) == 3:
        return st.eval_lit(f)
    if f == L.TRUE:
        return True
    if f == L.FALSE:
        return False
    if f[0] == "and":
        unknown = False
        for g in f[1]:
            v = _eval_formula(st, g)
            if v is False:
                return False
            if v is None:
                unknown = True
        return None if unknown else True
    unknown = False
    for g in f[1]:
        v = _eval_formula(st, g)
        if v is True:
            return True
        if v is None:
            unknown = True
    return None if unknown else False


class Solver:
    """Decides satisfiability of quantifier-free formulas over a signature."""

    def __init__(self, sig: L.Signature, budget: int = 2_000_000):
        self.sig = sig
        self.budget = budget
        self.calls = 0
        self._steps = 0

    def check(self, f, want_model: bool = True) -> SatResult:
        self.calls += 1
        if f == L.TRUE:
            return SatResult(SAT, Model() if want_model else None)
        if f == L.FALSE:
            return SatResult(UNSAT)
        terms = L.terms_of(f)
        try:
            p = _Problem(self.sig, terms)
        except SolverError as e:
            return SatResult(UNKNOWN, reason=str(e))
        self._steps = 0
        try:
            st = _State(p)
            st._drain()
            st._propagate()
            clauses: list = []
            self._assert(st, f, clauses)
            res = self._search(st, clauses)
        except _Conflict:
            return SatResult(UNSAT)
        except _Budget:
            return SatResult(UNKNOWN, reason="budget")
        if res is None:
            return SatResult(UNSAT)
        model = _build_model(res) if want_model or __debug__ else None
        if model is not None and not eval_model(model, f):
            raise SolverError("internal: model does not satisfy the formula")
        return SatResult(SAT, model if want_model else None)

    def _assert(self, st: _State, f, clauses: list) -> None:
        if len(f) == 3:
            st.assert_lit(f)
        elif f == L.TRUE:
            return
        elif f == L.FALSE:
            raise _Conflict
        elif f[0] == "and":
            for g in f[1]:
                if len(g) == 3:
                    st.assert_lit(g)
            for g in f[1]:
                if len(g) != 3:
                    self._assert(st, g, clauses)
        elif f[0] == "or":
            clauses.append(f[1])
        else:
            raise ValueError(f"bad formula {f!r}")

    def _tick(self) -> None:
        self._steps += 1
        if self._steps > self.budget:
            raise _Budget

    def _search(self, st: _State, clauses: list) -> Optional[_State]:
        self._tick()
        while True:
            changed = False
            rest = []
            units = []
            for cl in clauses:
                alts = []
                done = False
                for a in cl:
                    v = _eval_formula(st, a)
                    if v is True:
                        done = True
                        break
                    if v is None:
                        alts.append(a)
                if done:
                    continue
                if not alts:
                    return None
                if len(alts) == 1:
                    units.append(alts[0])
                else:
                    rest.append(tuple(alts))
            clauses = rest
            if units:
                changed = True
                try:
                    for u in units:
                        self._assert(st, u, clauses)
                except _Conflict:
                    return None
            if not changed:
                break
        if not clauses:
            return self._complete(st)
        best = min(range(len(clauses)), key=lambda i: len(clauses[i]))
        cl = clauses[best]
        others = clauses[:best] + clauses[best + 1:]
        for i, a in enumerate(cl):
            s2 = st.copy()
            cs = list(others)
            try:
                for prev in cl[:i]:
                    if len(prev) == 3:
                        s2.assert_lit(L.negate_lit(prev))
                self._assert(s2, a, cs)
            except _Conflict:
                continue
            r = self._search(s2, cs)
            if r is not None:
                return r
        return None

    def _complete(self, st: _State) -> Optional[_State]:
        """Resolve remaining choices: undef pairs and finite classes."""
        self._tick()
        p = st.p
        for a, t in p.axiom_pairs:
            ra, rt = st.find(a), st.find(t)
            if st.is_undef(ra) or st.is_undef(rt) or ra in st.nonundef:
                continue
            # undetermined: prefer a defined argument
            s2 = st.copy()
            try:
                s2.add_nonundef(ra)
                s2._propagate()
                r = self._complete(s2)
                if r is not None:
                    return r
            except _Conflict:
                pass
            s3 = st.copy()
            try:
                s3.merge(ra, p.undef_of[p.sort[a]])
                s3._propagate()
            except _Conflict:
                return None
            return self._complete(s3)
        best = None
        for i in range(len(p.terms)):
            if not p.finite[i] or st.find(i) != i:
                continue
            if st.val.get(i, _NOVAL) is not _NOVAL:
                continue
            d = st.dom[i]
            if best is None or len(d) < len(st.dom[best]):
                best = i
        if best is None:
            return st
        d = st.dom[best]
        for v in sorted(d, key=_value_order):
            s2 = st.copy()
            try:
                s2.restrict(best, frozenset([v]))
                s2._propagate()
            except _Conflict:
                continue
            r = self._complete(s2)
            if r is not None:
                return r
        return None


def _value_order(v):
    if v is None:
        return (1, "")
    return (0, repr(v)) if not isinstance(v, int) else (0, f"{v:012d}")


def _build_model(st: _State) -> Model:
    p = st.p
    m = Model()
    rootval: dict = {}
    fresh: dict = {}
    for i, t in enumerate(p.terms):
        r = st.find(i)
        if r not in rootval:
            v = st.val.get(r, _NOVAL)
            if v is _NOVAL:
                n = fresh.get(t.sort, 0)
                fresh[t.sort] = n + 1
                v = f"{t.sort}!{n}"
            rootval[r] = v
        v = rootval[r]
        m.carriers.setdefault(t.sort, set()).add(v)
        if t.arg is None:
            if t.kind != L.CONST:
                m.assign[t] = v
        else:
            m.tables.setdefault((t.kind, t.name), {})[rootval[st.find(p.id[t.arg])]] = v
    return m


def check_sat(f, sig: L.Signature) -> SatResult:
    return Solver(sig).check(f)


def simplify(f, sig: L.Signature):
    """Equivalence-preserving cleanup of a formula.

    Folds constants, propagates top-level equalities between variables and
    constants, and returns FALSE when the top-level literals are already
    contradictory (closure with the undef axiom).
    """
    f = L.neg(L.neg(f)) if f not in (L.TRUE, L.FALSE) else f
    if f in (L.TRUE, L.FALSE):
        return f
    parts = f[1] if f[0] == "and" else (f,)
    lits = [p for p in parts if len(p) == 3]
    if lits:
        try:
            p = _Problem(sig, L.terms_of(("and", tuple(lits)) if len(lits) > 1 else lits[0]))
            st = _State(p)
            st._drain()
            for l in lits:
                st.assert_lit(l)
            st._propagate()
        except _Conflict:
            return L.FALSE
        except SolverError:
            pass
    m = {}
    for l in lits:
        if l[0] == L.EQ:
            a, b = l[1], l[2]
            if a.kind == L.CONST and b.arg is None and b.kind != L.CONST:
                a, b = b, a
            if b.kind == L.CONST and a.arg is None and a.kind != L.CONST and a not in m:
                m[a] = b
    if not m:
        return f
    keep = [L.eq(a, b) for a, b in m.items()]
    rest = []
    for p in parts:
        if len(p) == 3 and p[0] == L.EQ and p in keep:
            continue
        rest.append(L.subst(p, m))
    return L.conj(keep + rest)
