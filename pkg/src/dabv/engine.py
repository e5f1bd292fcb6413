"""Backward reachability over the translated transition system.

A state formula is a conjunction of literals under an existential prefix of
index variables.  Preimages substitute the rule's assignments, split each
updated array read over the branches of its case-defined update, and
eliminate the data variables the rule introduced.  Frontier formulas are
kept as separate cubes with provenance so traces can be read back.
"""
from __future__ import annotations

import itertools
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import logic as L
from .smt.solver import Solver, SatResult, SAT, UNSAT
from .translator import Rule, StateFormula, TransitionSystem, clamp

SAFE, UNSAFE, UNKNOWN = "safe", "unsafe", "unknown"
STRONGLY_LOCAL, LOCAL, NON_LOCAL = "StronglyLocal", "Local", "NonLocal"


class Unsupported(Exception):
    """A formula shape outside what the eliminator handles."""


# -- small formula helpers -----------------------------------------------------

def _proper(t: L.Term):
    return L.ne(t, L.undef(t.sort))


def _implied(l, facts: frozenset) -> bool:
    if l in facts:
        return True
    if l[0] == L.NE and (L.is_undef(l[1]) or L.is_undef(l[2])):
        t = l[2] if L.is_undef(l[1]) else l[1]
        for f in facts:
            if f[0] in (L.LT, L.LE) and (f[1] is t or f[2] is t):
                return True
            if f[0] == L.EQ and ((f[1] is t and f[2].kind == L.CONST and f[2].name is not None)
                                 or (f[2] is t and f[1].kind == L.CONST and f[1].name is not None)):
                return True
    return False


def _refuted(l, facts: frozenset) -> bool:
    if len(l) != 3:
        return False
    n = L.negate_lit(l)
    return len(n) == 3 and _implied(n, facts)


def prune(f, facts: Optional[frozenset] = None):
    """Simplify nested disjunctions against the top-level literals of f."""
    if f in (L.TRUE, L.FALSE) or len(f) == 3:
        return f
    if facts is None:
        top = f[1] if f[0] == "and" else ()
        facts = frozenset(p for p in top if len(p) == 3)
    if f[0] == "and":
        return L.conj(p if len(p) == 3 else prune(p, facts) for p in f[1])
    alts = []
    for p in f[1]:
        if len(p) == 3:
            if _implied(p, facts):
                return L.TRUE
            if _refuted(p, facts):
                continue
            alts.append(p)
        else:
            alts.append(prune(p, facts))
    return L.disj(alts)


def _tidy(lits) -> Optional[frozenset]:
    """Drop literals implied by others; None if some literal is false."""
    s = set()
    for l in lits:
        l = clamp_lit(l)
        if l == L.FALSE:
            return None
        if l != L.TRUE:
            s.add(l)
    fs = frozenset(s)
    out = set()
    for l in fs:
        if l[0] == L.NE and (L.is_undef(l[1]) or L.is_undef(l[2])) and _implied(l, fs - {l}):
            continue
        out.add(l)
    for l in out:
        if len(l) == 3 and L.negate_lit(l) in out:
            return None
    return frozenset(out)


_SIG: list = [None]


def clamp_lit(l):
    sig = _SIG[0]
    if sig is None:
        return l
    return clamp(l, sig)


def index_vars(lits) -> list:
    out = set()
    for l in lits:
        for t in (l[1], l[2]):
            for s in L.subterms(t):
                if s.kind == L.IVAR:
                    out.add(s)
    return sorted(out, key=lambda t: t.key)


def data_vars(lits) -> list:
    out = set()
    for l in lits:
        for t in (l[1], l[2]):
            for s in L.subterms(t):
                if s.kind == L.DVAR:
                    out.add(s)
    return sorted(out, key=lambda t: t.key)


# -- quantifier elimination ---------------------------------------------------------

def _solve_eqs(lits: frozenset, targets) -> Optional[frozenset]:
    """Substitute data variables defined by an equation, repeatedly."""
    cur = set(lits)
    while True:
        pick = None
        for l in cur:
            if l[0] != L.EQ:
                continue
            for x, t in ((l[1], l[2]), (l[2], l[1])):
                if x.kind == L.DVAR and x in targets and not L.contains(t, x):
                    if pick is None or (t.kind == L.DVAR) < (pick[1].kind == L.DVAR):
                        pick = (x, t)
        if pick is None:
            return frozenset(cur)
        r = L.subst_lits(cur, {pick[0]: pick[1]})
        if r is None:
            return None
        cur = set(r)


_zn = itertools.count()


def _eliminate_var(lits: frozenset, y: L.Term, sig: L.Signature) -> list:
    """Disjunction (as a list of cubes) equivalent to exists y. lits in the model completion."""
    mentioning = [l for l in lits if L.contains(l[1], y) or L.contains(l[2], y)]
    rest = lits - set(mentioning)
    info = sig.sorts.get(y.sort)
    if info is not None and info.finite:
        out = []
        ground = all(all(s.kind == L.CONST or s is y for s in (l[1], l[2])) for l in mentioning)
        if ground:
            for v in info.carrier():
                if L.subst_lits(mentioning, {y: L.const(v, y.sort) if v is not None else L.undef(y.sort)}) == []:
                    return [rest]
            return []
        for v in info.carrier():
            c = L.const(v, y.sort) if v is not None else L.undef(y.sort)
            r = L.subst_lits(mentioning, {y: c})
            if r is not None:
                out.append(rest | frozenset(r))
        return out
    out = []
    r = L.subst_lits(mentioning, {y: L.undef(y.sort)})
    if r is not None:
        out.append(rest | frozenset(r))
    # y a fresh proper element: its function values are fresh as well
    apps = {}
    for l in mentioning:
        for t in (l[1], l[2]):
            for s in L.subterms(t):
                if s.kind == L.APP and s.arg is y:
                    apps[s] = None
    m = {}
    extra = []
    for a in apps:
        z = L.dvar(f"z{next(_zn)}", a.sort)
        m[a] = z
        extra.append(_proper(z))
    new = []
    ok = True
    for l in mentioning:
        l2 = L.subst(l, m) if m else l
        if l2 == L.TRUE:
            continue
        if l2 == L.FALSE:
            ok = False
            break
        if L.contains(l2[1], y) or L.contains(l2[2], y):
            if l2[0] == L.NE and (l2[1] is y or l2[2] is y):
                continue  # a fresh element differs from everything else
            if l2[0] in L.CMP_OPS:
                raise Unsupported(f"comparison on unbounded sort {y.sort}")
            raise Unsupported(f"cannot eliminate {L.show_term(y)} from {L.show_lit(l2)}")
        new.append(l2)
    if ok:
        out.append(rest | frozenset(new) | frozenset(extra))
    return out


def qe_cube(lits: frozenset, targets, sig: L.Signature, limit: int = 5000) -> list:
    """Eliminate the data variables `targets` from a cube; returns a list of cubes."""
    work = [frozenset(lits)]
    done = []
    targets = set(targets)
    steps = 0
    while work:
        steps += 1
        if steps > limit:
            raise Unsupported("elimination blew up")
        c = work.pop()
        live = {v for v in data_vars(c) if v.kind == L.DVAR}
        c2 = _solve_eqs(c, live)
        if c2 is None:
            continue
        ys = [v for v in data_vars(c2)]
        if not ys:
            done.append(c2)
            continue
        # eliminate the variable occurring in the fewest literals first
        y = min(ys, key=lambda v: (sum(1 for l in c2 if L.contains(l[1], v) or L.contains(l[2], v)), v.key))
        work.extend(_eliminate_var(c2, y, sig))
    return done


def quantifier_eliminate(sf: StateFormula, sig: L.Signature) -> list:
    """Eliminate every data variable of a state formula; returns state formulas."""
    out = []
    for c in qe_cube(sf.lits, data_vars(sf.lits), sig):
        t = _tidy(c)
        if t is None:
            continue
        out.append(StateFormula(tuple(index_vars(t)), t))
    return out


# -- preimage ----------------------------------------------------------------

def _merge_index_eqs(lits: frozenset) -> Optional[frozenset]:
    cur = set(lits)
    while True:
        pick = None
        for l in cur:
            if l[0] == L.EQ and l[1].kind == L.IVAR and l[2].kind == L.IVAR:
                pick = l
                break
            if l[0] == L.EQ and ((l[1].kind == L.IVAR and l[2].kind == L.CONST)
                                 or (l[2].kind == L.IVAR and l[1].kind == L.CONST)):
                pick = l
                break
        if pick is None:
            return frozenset(cur)
        a, b = pick[1], pick[2]
        if a.kind == L.CONST:
            a, b = b, a
        r = L.subst_lits(cur, {a: b})
        if r is None:
            return None
        cur = set(r)


def _rename_rule(r: Rule, tag: str) -> tuple:
    m = {}
    for p in r.params:
        pre = "p" if p.kind == L.IVAR else "y"
        m[p] = (L.ivar if p.kind == L.IVAR else L.dvar)(f"{pre}{tag}.{p.name}", p.sort)
    return m


def raw_preimage(ts: TransitionSystem, r: Rule, sf: StateFormula, tag: str = "0", full: bool = False):
    """The preimage formula before elimination.

    Returns None when the rule cannot affect sf, unless `full` asks for the
    exact preimage (guard and sf) in that case too.
    """
    lits = sf.lits
    terms = set()
    for l in lits:
        terms |= set(L.subterms(l[1])) | set(L.subterms(l[2]))
    assigned = {x: t for x, t in r.assign}
    arrays = r.arrays()
    touched = [t for t in terms if t in assigned] + [t for t in terms if t.kind == L.READ and t.name in arrays]
    if not touched and not full:
        return None
    ren = _rename_rule(r, tag)
    post: dict = {x: L.subst_term(t, ren) for x, t in assigned.items() if x in terms}
    guard = L.subst(r.guard, ren)
    # per index term, choose the branch of each updated relation
    choices = []
    for u in r.updates:
        upd_arrays = {a for c in u.cases for a, _ in c.values}
        idxs = sorted({t.arg for t in terms if t.kind == L.READ and t.name in upd_arrays}, key=lambda t: t.key)
        for idx in idxs:
            reads = [t for t in terms if t.kind == L.READ and t.arg is idx and t.name in upd_arrays]
            opts = []
            prior = []
            for c in u.at(idx):
                cidx = ren.get(c.index, c.index) if c.index is not None else None
                cond = L.subst(c.cond, ren)
                match = L.conj(([L.eq(idx, cidx)] if cidx is not None else []) + [cond])
                vals = {}
                for rd in reads:
                    v = c.value(rd.name)
                    if v is not None:
                        vals[rd] = L.subst_term(v, ren)
                opts.append((L.conj(prior + [match]), vals))
                prior.append(L.neg(match))
            opts.append((L.conj(prior), {}))
            choices.append(opts)
    alts = []
    for combo in itertools.product(*choices):
        m = dict(post)
        conds = []
        for cond, vals in combo:
            conds.append(cond)
            m.update(vals)
        body = L.subst(sf.formula(), m) if m else sf.formula()
        alts.append(L.conj(conds + [body]))
    return L.conj([guard, L.disj(alts)])


def preimage(ts: TransitionSystem, r: Rule, sf: StateFormula, tag: str = "0", full: bool = False) -> list:
    """Preimage of a state formula as a list of eliminated, satisfiable-looking cubes."""
    f = raw_preimage(ts, r, sf, tag, full)
    if f is None or f == L.FALSE:
        return []
    f = prune(f)
    out = []
    for cube in L.dnf(f):
        cube = _merge_index_eqs(cube)
        if cube is None:
            continue
        t = _tidy(cube)
        if t is None:
            continue
        for c in qe_cube(t, data_vars(t), ts.sig):
            c = _merge_index_eqs(c)
            if c is None:
                continue
            c = _tidy(c)
            if c is None:
                continue
            out.append(StateFormula(tuple(index_vars(c)), c))
    return out


# -- canonical form, grounding --------------------------------------------------

def canonical(sf: StateFormula) -> StateFormula:
    idx = index_vars(sf.lits)
    # order index variables by the literals they occur in, for stable names
    def sig_of(e):
        return sorted(L.show_lit(l).replace(e.name, "#") for l in sf.lits if
                      L.contains(l[1], e) or L.contains(l[2], e))
    idx = sorted(idx, key=lambda e: (e.sort, sig_of(e), e.key))
    m = {e: L.ivar(f"x{k}", e.sort) for k, e in enumerate(idx)}
    tmp = {e: L.ivar(f"tmp{k}", e.sort) for k, e in enumerate(idx)}
    lits = L.subst_lits(sf.lits, tmp) or []
    back = {tmp[e]: m[e] for e in idx}
    lits = L.subst_lits(lits, back) or []
    return StateFormula(tuple(m[e] for e in idx), frozenset(lits))


def ground(sf: StateFormula, ts: TransitionSystem) -> list:
    """Expand index variables over the index constants of a bounded repository."""
    if not sf.indexes:
        return [sf]
    pools = []
    for e in sf.indexes:
        vals = ts.sig.sorts[e.sort].values
        if vals is None:
            return [sf]
        pools.append([L.const(v, e.sort) for v in vals])
    out = []
    for combo in itertools.product(*pools):
        r = L.subst_lits(sf.lits, dict(zip(sf.indexes, combo)))
        if r is None:
            continue
        t = _tidy(r)
        if t is not None:
            out.append(StateFormula((), t))
    return out


def symmetric_rep(sf: StateFormula, ts: TransitionSystem) -> StateFormula:
    """Least renaming of a ground cube under permutations of the index constants.

    Cells of a bounded repository are interchangeable: the initial state, the
    rules and the properties are all symmetric in them.
    """
    consts = {}
    for l in sf.lits:
        for t in (l[1], l[2]):
            for u in L.subterms(t):
                if u.kind == L.CONST and u.name is not None and u.sort in ts.setting.index_sorts.values():
                    consts.setdefault(u.sort, set()).add(u)
    if not consts:
        return sf
    sorts = sorted(consts)
    perms = []
    for srt in sorts:
        names = [L.const(v, srt) for v in ts.sig.sorts[srt].values]
        perms.append([dict(zip(names, p)) for p in itertools.permutations(names)])
    best, best_key = sf, None
    for combo in itertools.product(*perms):
        m = {}
        for d in combo:
            m.update(d)
        lits = L.subst_lits(sf.lits, m)
        if lits is None:
            continue
        key = sorted(L.show_lit(l) for l in lits)
        if best_key is None or key < best_key:
            best, best_key = StateFormula((), frozenset(lits)), key
    return best


# -- checks ----------------------------------------------------------------------

class Checker:
    def __init__(self, ts: TransitionSystem, solver=None):
        self.ts = ts
        self.solver = solver or Solver(ts.sig)

    @property
    def calls(self) -> int:
        return self.solver.calls

    def sat(self, f) -> SatResult:
        return self.solver.check(f, want_model=False)

    def satisfiable(self, sf: StateFormula) -> bool:
        r = self.sat(sf.formula())
        if r.status not in (SAT, UNSAT):
            raise Unsupported(f"solver: {r.reason}")
        return r.status == SAT

    def meets_initial(self, sf: StateFormula) -> bool:
        f = self.ts.init_subst(sf.formula())
        r = self.sat(f)
        if r.status not in (SAT, UNSAT):
            raise Unsupported(f"solver: {r.reason}")
        return r.status == SAT


def _facts(sf: StateFormula) -> dict:
    out = {}
    for l in sf.lits:
        if l[0] == L.EQ:
            a, b = l[1], l[2]
            if a.kind == L.CONST:
                a, b = b, a
            if a.kind == L.VAR and b.kind == L.CONST:
                out[a] = b
    return out


class Visited:
    """The set B of already explored cubes, with instantiation-based subsumption."""

    def __init__(self, checker: Checker):
        self.checker = checker
        self.items: list = []  # (StateFormula, facts)
        self.keys: set = set()

    def __len__(self) -> int:
        return len(self.items)

    def add(self, sf: StateFormula) -> None:
        self.items.append((sf, _facts(sf)))
        self.keys.add(sf.lits)

    def subsumes(self, sf: StateFormula) -> bool:
        if sf.lits in self.keys:
            return True
        facts = _facts(sf)
        negs = []
        E = sf.indexes
        for psi, pf in self.items:
            if any(facts.get(x, c) is not c for x, c in pf.items()):
                continue
            F = psi.indexes
            if F and not E:
                continue
            maps = [dict()] if not F else [dict(zip(F, img)) for img in itertools.product(E, repeat=len(F))
                                           if all(a.sort == b.sort for a, b in zip(F, img))]
            for m in maps:
                lits = L.subst_lits(psi.lits, m) if m else list(psi.lits)
                if lits is None:
                    continue
                lits = L.subst_lits(lits, facts) if facts else lits
                if lits is None:
                    continue
                # psi instance already implied syntactically
                base = L.subst_lits(sf.lits, facts) if facts else list(sf.lits)
                if base is not None and set(lits) <= set(base) | set(sf.lits):
                    return True
                negs.append(L.neg(L.conj(lits)))
        if not negs:
            return False
        f = L.conj([sf.formula()] + negs)
        r = self.checker.sat(f)
        if r.status == UNSAT:
            return True
        return False


# -- the reachability loop --------------------------------------------------------

@dataclass
class Config:
    timeout: float = 60.0
    max_depth: int = 500
    max_nodes: int = 200_000
    control_invariant: bool = True  # prune cubes whose lifecycle states no run can show
    free_cells: bool = True  # drop "some free cell exists" conjuncts when the repository is unbounded
    symmetry: bool = True  # keep one cube per permutation of bounded-repository cells


WAITING_STATES = ("waiting", "waiting1", "waiting2")


class ControlInvariant:
    """A running block's parent is waiting: holds in every reachable state."""

    def __init__(self, ts: TransitionSystem):
        from . import blocks as Bk
        from .translator import control_var
        dab = ts.dab
        absorbed = set()
        if "nseq" in ts.options:
            from .translator import flatten_sequence, _sequence_nodes
            for b in Bk.walk(dab.root):
                if b.kind == Bk.SEQUENCE and b.name not in absorbed and len(flatten_sequence(b)) > 2:
                    absorbed.update(c.name for c in _sequence_nodes(b) if c is not b)
        par = Bk.parents(dab.root)
        self.pairs = []
        for b in Bk.walk(dab.root):
            if b.name in absorbed or b.name not in par:
                continue
            p = par[b.name]
            while p.name in absorbed:
                p = par[p.name]
            self.pairs.append((control_var(b), control_var(p)))

    def violated(self, sf: StateFormula) -> bool:
        facts = _facts(sf)
        busy = set()
        for l in sf.lits:
            if l[0] == L.NE and l[1].kind == L.CONST and l[1].name == "idle" and l[2].kind == L.VAR:
                busy.add(l[2])
        for c, p in self.pairs:
            cv = facts.get(c)
            if (cv is not None and cv.name != "idle") or c in busy:
                pv = facts.get(p)
                if pv is not None and pv.name not in WAITING_STATES:
                    return True
        return False


def drop_free_cells(sf: StateFormula, ts: TransitionSystem) -> StateFormula:
    """Remove index variables constrained only to denote a free, distinct cell."""
    if ts.repo_bound is not None:
        return sf
    drop = set()
    for e in sf.indexes:
        ok = True
        for l in sf.lits:
            if not (L.contains(l[1], e) or L.contains(l[2], e)):
                continue
            if l[0] == L.NE and l[1].kind == L.IVAR and l[2].kind == L.IVAR:
                continue
            if l[0] == L.EQ and L.is_undef(l[1]) and l[2].kind == L.READ and l[2].arg is e:
                continue
            ok = False
            break
        if ok:
            drop.add(e)
    if not drop:
        return sf
    lits = frozenset(l for l in sf.lits if not any(L.contains(l[1], e) or L.contains(l[2], e) for e in drop))
    return StateFormula(tuple(e for e in sf.indexes if e not in drop), lits)


@dataclass
class Node:
    id: int
    sf: StateFormula
    depth: int
    rule: Optional[str] = None
    parent: Optional[int] = None


@dataclass
class Verdict:
    status: str
    property: str = ""
    trace: list = field(default_factory=list)
    reason: str = ""
    fixpoint: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    witness: Optional[dict] = None
    cube: Optional[StateFormula] = None  # the unsafe cube the trace ends in
    rules: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"formatVersion": 1, "verdict": self.status, "property": self.property,
               "trace": list(self.trace), "stats": dict(self.stats)}
        if self.reason:
            out["reason"] = self.reason
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def initial_cubes(ts: TransitionSystem, unsafe: list) -> list:
    out = []
    for sf in unsafe:
        for c in qe_cube(sf.lits, data_vars(sf.lits), ts.sig):
            c = _merge_index_eqs(c)
            if c is None:
                continue
            t = _tidy(c)
            if t is not None:
                out.append(StateFormula(tuple(index_vars(t)), t))
    return out


def backward_reach(ts: TransitionSystem, unsafe: list, cfg: Optional[Config] = None, name: str = "",
                   solver=None) -> Verdict:
    cfg = cfg or Config()
    _SIG[0] = ts.sig
    t0 = time.monotonic()
    checker = Checker(ts, solver)
    visited = Visited(checker)
    nodes: list = []
    queue: deque = deque()
    stats = {"iterations": 0, "frontierPeak": 0, "smtCalls": 0, "wallMs": 0}

    def finish(v: Verdict) -> Verdict:
        stats["smtCalls"] = checker.calls
        stats["wallMs"] = int((time.monotonic() - t0) * 1000)
        v.stats = stats
        v.property = name
        return v

    inv = ControlInvariant(ts) if cfg.control_invariant else None

    def push(sf: StateFormula, depth: int, rule, parent) -> None:
        if cfg.free_cells:
            sf = drop_free_cells(sf, ts)
        if inv is not None and inv.violated(sf):
            return
        seen = set()
        for g in ground(canonical(sf), ts):
            g = canonical(g)
            if cfg.symmetry and ts.repo_bound is not None:
                g = symmetric_rep(g, ts)
                if g.lits in seen:
                    continue
                seen.add(g.lits)
            n = Node(len(nodes), g, depth, rule, parent)
            nodes.append(n)
            queue.append(n)

    try:
        for sf in initial_cubes(ts, unsafe):
            push(sf, 0, None, None)
        while queue:
            stats["frontierPeak"] = max(stats["frontierPeak"], len(queue))
            if time.monotonic() - t0 > cfg.timeout:
                return finish(Verdict(UNKNOWN, reason="timeout"))
            if len(nodes) > cfg.max_nodes:
                return finish(Verdict(UNKNOWN, reason="node-limit"))
            n = queue.popleft()
            if not checker.satisfiable(n.sf):
                continue
            if visited.subsumes(n.sf):
                continue
            stats["iterations"] += 1
            if checker.meets_initial(n.sf):
                rules, root = _trace(nodes, n)
                return finish(Verdict(UNSAFE, trace=[ts.rule(x).base for x in rules], rules=rules,
                                      cube=root.sf))
            if n.depth >= cfg.max_depth:
                return finish(Verdict(UNKNOWN, reason="depth-limit"))
            visited.add(n.sf)
            for k, r in enumerate(ts.rules):
                for p in preimage(ts, r, n.sf, f"{n.id}.{k}"):
                    push(p, n.depth + 1, r.name, n.id)
    except Unsupported as e:
        return finish(Verdict(UNKNOWN, reason=f"solver-failure: {e}"))
    except OverflowError as e:
        return finish(Verdict(UNKNOWN, reason=f"solver-failure: {e}"))
    return finish(Verdict(SAFE, fixpoint=[sf for sf, _ in visited.items]))


def _trace(nodes: list, n: Node) -> tuple:
    out = []
    while n.parent is not None:
        out.append(n.rule)
        n = nodes[n.parent]
    return out, n


# -- locality ------------------------------------------------------------------

def _lit_index_vars(l) -> set:
    return {s for t in (l[1], l[2]) for s in L.subterms(t) if s.kind == L.IVAR}


def _lit_vars(l) -> set:
    return {s for t in (l[1], l[2]) for s in L.subterms(t) if s.kind == L.VAR}


def classify_formula(sf: StateFormula) -> str:
    strong = True
    for l in sf.lits:
        iv = _lit_index_vars(l)
        if len(iv) > 1:
            if l[0] == L.NE and l[1].kind == L.IVAR and l[2].kind == L.IVAR:
                continue
            return NON_LOCAL
        if iv and _lit_vars(l):
            strong = False
    return STRONGLY_LOCAL if strong else LOCAL


def _reads_only_at(t: L.Term, idx) -> bool:
    return all(s.kind != L.READ or s.arg is idx for s in L.subterms(t))


def is_local_preserving(r: Rule, ts: TransitionSystem) -> bool:
    """Whether the rule matches an update template whose preimages keep strong locality."""
    if any(not u.local for u in r.updates):
        return False
    glits = list(L.literals(r.guard))
    for l in glits:
        iv = _lit_index_vars(l)
        if len(iv) > 1 or (iv and _lit_vars(l)):
            return False
    guard_idx = {e for l in glits for e in _lit_index_vars(l)}
    reads_in_rhs = {s.arg for _, t in r.assign for s in L.subterms(t) if s.kind == L.READ}
    if len(reads_in_rhs) > 1:
        return False
    if reads_in_rhs:
        # every data-carrying variable must be overwritten with a constant or a
        # read of the selected tuple
        e = next(iter(reads_in_rhs))
        controls = {v for v in ts.variables if v.sort in ("Lifecycle", "_Flag")}
        for v in ts.variables:
            if v in controls:
                continue
            t = r.rhs(v)
            if t is None or not (t.kind == L.CONST or (t.kind == L.READ and t.arg is e)):
                return False
    for u in r.updates:
        for c in u.cases:
            for s in L.terms_of(c.cond):
                if s.kind in (L.VAR, L.DVAR) or (s.kind == L.READ and s.arg is not u.j):
                    return False
            for _, t in c.values:
                if c.index is None:
                    if any(s.kind in (L.VAR, L.DVAR) for s in L.subterms(t)) or not _reads_only_at(t, u.j):
                        return False
                elif any(s.kind == L.READ for s in L.subterms(t)):
                    return False
    if len(guard_idx - {c.index for u in r.updates for c in u.cases}) > 1:
        return False
    return True


# -- termination classes --------------------------------------------------------

REPO_BOUNDED = "DecidableRepoBounded"
SEPARATED_MULTISET = "DecidableSeparatedMultiset"
SEMI = "SemiDecidable"


def all_updates(dab) -> list:
    from . import blocks as Bk
    seen = {}
    for u in dab.updates.values():
        seen[u.name] = u
    for b in Bk.walk(dab.root):
        for s in Bk._specs(b):
            seen.setdefault(s.name, s)
    return list(seen.values())


@dataclass
class ClassReport:
    acyclic: bool
    cycle: Optional[list]
    clauses: dict  # update name -> TheoremClause
    klass: str
    properties: dict = field(default_factory=dict)  # name -> (separated, locality)

    def to_json(self) -> dict:
        return {"formatVersion": 1, "acyclic": self.acyclic, "cycle": self.cycle,
                "updates": {n: {"clause": c.clause, "reason": c.reason} for n, c in self.clauses.items()},
                "class": self.klass,
                "properties": {n: {"separated": s, "locality": loc} for n, (s, loc) in self.properties.items()}}


def classify_dab(dab, semantics=None, repo_bound: Optional[int] = None) -> ClassReport:
    from .schema import characteristic_graph, find_cycle
    from .updates import classify_update, MULTISET
    sem = semantics or dab.semantics
    cyc = find_cycle(characteristic_graph(dab.schema.catalog))
    acyclic = cyc is None
    clauses = {u.name: classify_update(u, dab.schema, sem) for u in all_updates(dab)}
    if repo_bound is not None and acyclic:
        k = REPO_BOUNDED
    elif acyclic and sem.mode == MULTISET and all(c.ok for c in clauses.values()):
        k = SEPARATED_MULTISET
    else:
        k = SEMI
    return ClassReport(acyclic, cyc, clauses, k)


def termination_class(dab, semantics=None, repo_bound: Optional[int] = None) -> str:
    return classify_dab(dab, semantics, repo_bound).klass


def extract_trace(ts: TransitionSystem, v: Verdict, goal=None) -> Verdict:
    """Attach a concrete witness to an unsafe verdict and check it by replay."""
    from .witness import build_witness, check_witness
    from .interpreter import ReplayError
    if v.status != UNSAFE or v.cube is None:
        return v
    w = build_witness(ts, v.rules, v.cube)
    if w is None:
        v.witness = {"replayed": False, "reason": "no model for the unrolled trace"}
        return v
    out = w.to_json()
    try:
        check_witness(ts, w, goal, ts.repo_bound)
        out["replayed"] = True
    except ReplayError as e:
        out["replayed"] = False
        out["reason"] = str(e)
    v.witness = out
    return v
