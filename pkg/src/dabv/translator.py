"""Compile a DAB into an array-based transition system.

Case and control variables become artifact variables, each repository
relation gets an index sort and one array per attribute, catalog attributes
become unary functions.  Every block contributes guarded rules; an update
specification is rewritten into a guard plus simultaneous assignments and
case-defined array updates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import blocks as B
from . import logic as L
from . import query as Q
from . import updates as U
from .model import DAB
from .schema import DataSchema, functional_view

LIFECYCLE = Q.LIFECYCLE
FLAG = "_Flag"
NSEQ, ERREVENT = "nseq", "errevent"
OPTIONS = (NSEQ, ERREVENT)


class TranslationError(ValueError):
    pass


# -- translated objects --------------------------------------------------------

@dataclass(frozen=True)
class Case:
    """One branch of a case-defined array update, evaluated at cell `j`.

    The branch applies when `j` equals `index` (if given) and `cond` holds;
    `values` maps arrays to their new content at that cell.
    """
    index: Optional[L.Term]
    cond: tuple
    values: tuple  # ((array name, Term over j), ...)

    def value(self, array: str) -> Optional[L.Term]:
        for a, t in self.values:
            if a == array:
                return t
        return None


@dataclass(frozen=True)
class RelUpdate:
    relation: str
    j: L.Term
    cases: tuple
    local: bool = True

    def at(self, idx: L.Term) -> list:
        """Branches instantiated at a concrete index term."""
        m = {self.j: idx}
        out = []
        for c in self.cases:
            out.append(Case(c.index, L.subst(c.cond, m),
                            tuple((a, L.subst_term(t, m)) for a, t in c.values)))
        return out


@dataclass(frozen=True)
class Rule:
    name: str
    block: str
    base: str
    params: tuple = ()  # existential index and data variables
    guard: tuple = L.TRUE
    assign: tuple = ()  # ((VAR term, rhs), ...)
    updates: tuple = ()  # RelUpdate, at most one per relation
    witness: tuple = ()  # ((answer variable, term), ...)
    spec: Optional[str] = None
    template: str = "control"

    def assigned(self) -> set:
        return {x for x, _ in self.assign}

    def arrays(self) -> set:
        return {a for u in self.updates for c in u.cases for a, _ in c.values}

    def rhs(self, x: L.Term) -> Optional[L.Term]:
        for y, t in self.assign:
            if y is x:
                return t
        return None


@dataclass
class ArtifactSetting:
    variables: tuple  # VAR terms: case, control and hidden variables
    index_sorts: dict  # relation -> index sort name
    arrays: dict  # array name -> (relation, attribute, index sort, value sort)

    def array_of(self, relation: str, attribute: str) -> str:
        return array_name(relation, attribute)

    def relation_arrays(self, relation: str) -> list:
        return [a for a, v in self.arrays.items() if v[0] == relation]


@dataclass
class TransitionSystem:
    dab: DAB
    setting: ArtifactSetting
    sig: L.Signature
    init: dict  # VAR term -> initial value (None for undef)
    rules: tuple
    repo_bound: Optional[int] = None
    options: frozenset = frozenset()
    hidden: dict = field(default_factory=dict)  # name -> VAR term

    @property
    def variables(self) -> tuple:
        return self.setting.variables

    def var(self, name: str) -> L.Term:
        for v in self.setting.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(f"no rule {name}")

    def index_constants(self, relation: str) -> tuple:
        info = self.sig.sorts[self.setting.index_sorts[relation]]
        return info.values or ()

    def initial_formula(self):
        parts = []
        for v, val in self.init.items():
            parts.append(L.eq(v, L.const(val, v.sort) if val is not None else L.undef(v.sort)))
        return L.conj(parts)

    def init_subst(self, f):
        """Apply the initial state: variables to their values, every cell to undef."""
        m = {v: (L.const(val, v.sort) if val is not None else L.undef(v.sort)) for v, val in self.init.items()}
        for t in L.terms_of(f):
            if t.kind == L.READ:
                m[t] = L.undef(t.sort)
        return L.subst(f, m)


def array_name(relation: str, attribute: str) -> str:
    return f"{relation}.{attribute}"


def index_sort(relation: str) -> str:
    return f"{relation}_index"


def control_var(b: B.Block) -> L.Term:
    return L.var(b.control, LIFECYCLE)


def state(s: str) -> L.Term:
    return L.const(s, LIFECYCLE)


# -- schema ----------------------------------------------------------------------

def sort_info(decl) -> L.SortInfo:
    d = decl.domain
    if d.kind == "finite":
        return L.SortInfo(decl.name, tuple(d.values))
    if d.kind == "ordinal":
        return L.SortInfo(decl.name, tuple(range(d.lo, d.hi + 1)), ordinal=True)
    return L.SortInfo(decl.name)


def translate_schema(schema: DataSchema, root: Optional[B.Block] = None,
                     repo_bound: Optional[int] = None) -> tuple:
    """Artifact setting and signature for a schema (and optionally a process)."""
    sig = L.Signature()
    for s in schema.sorts:
        sig.add_sort(sort_info(s))
    sig.add_sort(L.SortInfo(LIFECYCLE, tuple(Q.STATES), has_undef=False))
    sig.add_sort(L.SortInfo(FLAG, ("false", "true"), has_undef=False))
    for f in functional_view(schema.catalog).functions:
        sig.functions[f.name] = (f.source, f.target)
    idx, arrays = {}, {}
    for r in schema.repo:
        s = index_sort(r.name)
        vals = None if repo_bound is None else tuple(f"{r.name}!{k}" for k in range(repo_bound))
        sig.add_sort(L.SortInfo(s, vals, has_undef=False))
        idx[r.name] = s
        for attr, srt in r.attributes:
            a = array_name(r.name, attr)
            arrays[a] = (r.name, attr, s, srt)
            sig.arrays[a] = (s, srt)
    vs = [L.var(v.name, v.sort) for v in schema.case_vars]
    if root is not None:
        vs += [L.var(c, LIFECYCLE) for c in B.control_variables(root)]
    return ArtifactSetting(tuple(vs), idx, arrays), sig


# -- guards ---------------------------------------------------------------------

class _Scope:
    """Fresh-variable bookkeeping while translating one rule."""

    def __init__(self, schema: DataSchema, prefix: str):
        self.schema = schema
        self.prefix = prefix
        self.n = 0
        self.params: list = []

    def index(self, relation: str, tag: str) -> L.Term:
        self.n += 1
        e = L.ivar(f"{tag}{self.n}", index_sort(relation))
        self.params.append(e)
        return e

    def data(self, name: str, sort: str) -> L.Term:
        v = L.dvar(name, sort)
        if v not in self.params:
            self.params.append(v)
        return v


def term_of(t, scope: Optional[_Scope] = None) -> L.Term:
    if isinstance(t, Q.CaseVar):
        return L.var(t.name, t.sort)
    if isinstance(t, Q.Const):
        return L.const(t.value, t.sort)
    if isinstance(t, Q.Undef):
        return L.undef(t.sort)
    if scope is not None:
        return scope.data(t.name, t.sort)
    return L.dvar(t.name, t.sort)


_CMPS = {"<": (L.LT, False), "<=": (L.LE, False), ">": (L.LT, True), ">=": (L.LE, True)}


def clamp(l, sig: L.Signature):
    """Fold a comparison between a term and an out-of-range or boundary constant."""
    if l in (L.TRUE, L.FALSE) or len(l) != 3 or l[0] not in L.CMP_OPS:
        return l
    op, a, b = l
    if a.kind == L.CONST and b.kind == L.CONST:
        return l
    if a.kind != L.CONST and b.kind != L.CONST:
        return l
    x = b if a.kind == L.CONST else a
    info = sig.sorts.get(x.sort)
    if info is None or not info.finite:
        return l
    sat = []
    for v in info.values:
        c = L.const(v, x.sort)
        r = L.lit(op, c, b) if a is x else L.lit(op, a, c)
        sat.append(r == L.TRUE)
    under = L.lit(op, L.undef(x.sort), b) if a is x else L.lit(op, a, L.undef(x.sort))
    if all(sat):
        return L.TRUE if under == L.TRUE else L.ne(x, L.undef(x.sort))
    if not any(sat):
        return L.FALSE if under == L.FALSE else L.eq(x, L.undef(x.sort))
    return l


def catalog_atom(schema: DataSchema, rel: str, args: list, positive: bool):
    r = schema.relation(rel)
    key = args[0]
    eqs = []
    for (attr, srt), t in zip(r.attributes[1:], args[1:]):
        f = L.app(f"f_{rel}_{attr}", key, srt)
        eqs.append((t, f))
    if positive:
        return L.conj([L.ne(key, L.undef(key.sort))] + [L.eq(t, f) for t, f in eqs])
    return L.disj([L.eq(key, L.undef(key.sort))] + [L.ne(t, f) for t, f in eqs])


def occupied(relation: str, schema: DataSchema, idx: L.Term):
    r = schema.relation(relation)
    return L.disj(L.ne(L.read(array_name(relation, a), idx, s), L.undef(s)) for a, s in r.attributes)


def _repo_atom(schema: DataSchema, scope: _Scope, rel: str, args: list):
    r = schema.relation(rel)
    e = scope.index(rel, "e")
    parts = [L.eq(L.read(array_name(rel, a), e, s), t) for (a, s), t in zip(r.attributes, args)]
    parts.append(occupied(rel, schema, e))
    return e, parts


def translate_cq(q: Q.ConjQuery, schema: DataSchema, sig: L.Signature, scope: _Scope,
                 extra_vars: tuple = (), proper: bool = True) -> tuple:
    """Translate one conjunctive query.

    Returns (literal parts, repo atoms as (relation, index, args), solved map).
    `extra_vars` are additional data variables (answers, inputs).  With
    `proper`, variables not anchored in a positive relational atom must take
    proper (non-undef) values.
    """
    parts: list = []
    repo_atoms: list = []
    anchored: set = set()
    vars_seen: list = list(extra_vars)
    for a in q.atoms:
        for t in Q.atom_terms(a):
            if isinstance(t, Q.Var):
                v = term_of(t, scope)
                if v not in vars_seen:
                    vars_seen.append(v)
        if isinstance(a, Q.Eq):
            parts.append(L.eq(term_of(a.left, scope), term_of(a.right, scope)))
        elif isinstance(a, Q.Neq):
            parts.append(L.ne(term_of(a.left, scope), term_of(a.right, scope)))
        elif isinstance(a, Q.Cmp):
            op, flip = _CMPS[a.op]
            l, r = term_of(a.left, scope), term_of(a.right, scope)
            parts.append(clamp(L.lit(op, r, l) if flip else L.lit(op, l, r), sig))
        else:
            args = [term_of(t, scope) for t in a.args]
            if schema.is_catalog(a.relation):
                parts.append(catalog_atom(schema, a.relation, args, a.positive))
                if a.positive:
                    anchored.update(x for x in args if x.kind == L.DVAR)
            else:
                if not a.positive:
                    raise TranslationError(f"negated repository atom {a.relation} cannot be translated")
                e, ps = _repo_atom(schema, scope, a.relation, args)
                parts.extend(ps)
                repo_atoms.append((a.relation, e, args))
                anchored.update(x for x in args if x.kind == L.DVAR)
    if proper:
        for v in vars_seen:
            if v not in anchored:
                parts.append(L.ne(v, L.undef(v.sort)))
    flat = []
    for p in parts:
        flat.extend(p[1] if p[0] == "and" else (p,))
    return flat, repo_atoms


def solve(parts: list, keep: set = frozenset()) -> tuple:
    """Substitute data variables defined by an equation; returns (parts, map)."""
    m: dict = {}
    lits = list(parts)
    while True:
        found = None
        for l in lits:
            if len(l) == 3 and l[0] == L.EQ:
                for x, t in ((l[1], l[2]), (l[2], l[1])):
                    if x.kind == L.DVAR and x not in keep and not L.contains(t, x):
                        found = (x, t)
                        break
            if found:
                break
        if not found:
            return lits, m
        x, t = found
        step = {x: t}
        m = {k: L.subst_term(v, step) for k, v in m.items()}
        m[x] = t
        lits = [L.subst(l, step) for l in lits]
        if any(l == L.FALSE for l in lits):
            return [L.FALSE], m
        lits = [l for l in lits if l != L.TRUE]


def _drop_redundant_occupancy(parts: list) -> list:
    """Drop a cell-occupancy disjunction when a conjunct already pins one of its cells."""
    pinned = set()
    for l in parts:
        if len(l) == 3:
            if l[0] == L.EQ:
                for rd, other in ((l[1], l[2]), (l[2], l[1])):
                    if rd.kind == L.READ and other.kind == L.CONST and other.name is not None:
                        pinned.add(rd)
            elif l[0] == L.NE:
                for rd, other in ((l[1], l[2]), (l[2], l[1])):
                    if rd.kind == L.READ and L.is_undef(other):
                        pinned.add(rd)
            elif l[0] in (L.LT, L.LE):
                # order comparisons are false on undef
                pinned.update(t for t in (l[1], l[2]) if t.kind == L.READ)
    out = []
    for p in parts:
        if p[0] == "or" and all(len(q) == 3 and q[0] == L.NE for q in p[1]):
            reads = {q[1] if q[1].kind == L.READ else q[2] for q in p[1]}
            if reads & pinned:
                continue
        out.append(p)
    return out


# -- updates -----------------------------------------------------------------

@dataclass
class _Effect:
    guard: list = field(default_factory=list)
    assign: dict = field(default_factory=dict)
    updates: list = field(default_factory=list)
    template: str = "set"


def _eff_term(t, env: dict, scope: _Scope) -> L.Term:
    if isinstance(t, Q.Var):
        if t.name in env:
            return env[t.name]
        return scope.data(t.name, t.sort)
    return term_of(t)


def translate_effect(u: U.UpdateSpec, schema: DataSchema, sig: L.Signature, semantics: U.Semantics,
                     scope: _Scope, env: dict, repo_atoms: list) -> _Effect:
    out = _Effect()
    eff = u.eff
    for name, t in getattr(eff, "sets", ()):
        x = L.var(name, schema.case_var(name).sort)
        out.assign[x] = _eff_term(t, env, scope)
    if isinstance(eff, U.InsertSet):
        if eff.relation is None:
            return out
        r = schema.relation(eff.relation)
        vals = [_eff_term(t, env, scope) for t in eff.tuple]
        if all(L.is_undef(v) for v in vals):
            return out
        e = scope.index(eff.relation, "ins")
        j = L.ivar("j", index_sort(eff.relation))
        arrs = [array_name(r.name, a) for a, _ in r.attributes]
        for (a, s) in r.attributes:
            out.guard.append(L.eq(L.read(array_name(r.name, a), e, s), L.undef(s)))
        cases = [Case(e, L.TRUE, tuple(zip(arrs, vals)))]
        local = True
        out.template = "insert"
        if semantics.mode == U.SET:
            key = semantics.key_of(schema, r.name)
            match = L.conj(L.eq(L.read(arrs[k], j, r.attributes[k][1]), vals[k]) for k in key)
            cases.append(Case(None, match, tuple((a, L.undef(s)) for a, (_, s) in zip(arrs, r.attributes))))
            local = False
            out.template = "set-insert"
        out.updates.append(RelUpdate(r.name, j, tuple(cases), local))
        return out
    if isinstance(eff, U.DeleteSet):
        r = schema.relation(eff.relation)
        vals = [_eff_term(t, env, scope) for t in eff.tuple]
        e = None
        for rel, idx, args in repo_atoms:
            if rel == r.name and list(args) == vals:
                e = idx
                break
        if e is None:
            e = scope.index(r.name, "del")
            for (a, s), v in zip(r.attributes, vals):
                out.guard.append(L.eq(L.read(array_name(r.name, a), e, s), v))
            out.guard.append(occupied(r.name, schema, e))
        j = L.ivar("j", index_sort(r.name))
        arrs = [array_name(r.name, a) for a, _ in r.attributes]
        out.updates.append(RelUpdate(r.name, j, (Case(e, L.TRUE, tuple((a, L.undef(s)) for a, (_, s)
                                                                          in zip(arrs, r.attributes))),)))
        out.template = "delete"
        return out
    if isinstance(eff, U.CondUpdate):
        r = schema.relation(eff.relation)
        j = L.ivar("j", index_sort(r.name))
        arrs = [array_name(r.name, a) for a, _ in r.attributes]
        row = {}
        for (name, _), (a, s) in zip(eff.row_vars, r.attributes):
            row[name] = L.read(array_name(r.name, a), j, s)
        env2 = dict(env)
        env2.update(row)
        cases = []
        occ = occupied(r.name, schema, j)
        for path, leaf in _leaves(eff.tree):
            conds = [occ]
            for g, pos in path:
                f = _filter(g, schema, sig, env2)
                conds.append(f if pos else L.neg(f))
            vals = tuple((a, v) for a, v in ((a, _eff_term(t, env2, scope)) for a, t in zip(arrs, leaf.terms))
                         if v is not row_cell(a, j, r))
            cases.append(Case(None, L.conj(conds), vals))
        out.updates.append(RelUpdate(r.name, j, tuple(cases)))
        out.template = "cond"
        return out
    raise TranslationError(f"unknown effect in {u.name}")


def row_cell(array: str, j: L.Term, r) -> L.Term:
    attr = array.split(".", 1)[1]
    return L.read(array, j, dict(r.attributes)[attr])


def _leaves(n, path=()):
    if isinstance(n, U.RowSpec):
        yield path, n
        return
    yield from _leaves(n.then, path + ((n.filter, True),))
    yield from _leaves(n.orelse, path + ((n.filter, False),))


def _filter(g: Q.Guard, schema: DataSchema, sig: L.Signature, env: dict):
    """A repo-free filter over row and bound variables, as a formula in j."""
    alts = []
    for q in g.disjuncts:
        scope = _Scope(schema, "flt")
        parts, _ = translate_cq(q, schema, sig, scope, proper=False)
        m = {scope.data(n, t.sort): t for n, t in env.items()}
        parts = [L.subst(p, m) for p in parts]
        # variables named in the filter but bound nowhere are existential; only
        # those defined by an equation can be removed here
        parts, _ = solve(parts)
        if any(t.kind == L.DVAR for p in parts for t in L.terms_of(p)):
            raise TranslationError(f"filter {Q.show_body(g)} has unbound variables")
        alts.append(L.conj(parts))
    return L.disj(alts)


@dataclass
class _Spec:
    """A translated update specification, one per precondition disjunct."""
    params: list
    guard: list
    assign: dict
    updates: list
    witness: dict
    template: str


def translate_spec(u: Optional[U.UpdateSpec], schema: DataSchema, sig: L.Signature,
                   semantics: U.Semantics, hidden: Optional[dict] = None) -> list:
    """Rewrite an update specification into one _Spec per precondition disjunct.

    With `hidden`, the answer variables are read from hidden artifact
    variables instead of being chosen (second half of a nonatomic task).
    """
    if u is None:
        return [_Spec([], [], {}, [], {}, "control")]
    out = []
    for q in u.pre.disjuncts or ():
        scope = _Scope(schema, u.name)
        answers = [scope.data(n, s) for n, s in u.pre.answer]
        inputs = [scope.data(n, s) for n, s in u.inputs]
        parts, repo_atoms = translate_cq(q, schema, sig, scope, tuple(answers + inputs))
        parts, m = solve(parts, keep=set())
        if parts == [L.FALSE]:
            continue
        env = {}
        for v in list(answers) + list(inputs) + [p for p in scope.params if p.kind == L.DVAR]:
            env[v.name] = m.get(v, v)
        eff = translate_effect(u, schema, sig, semantics, scope, env, [
            (rel, e, [m.get(a, a) if a.kind == L.DVAR else a for a in args]) for rel, e, args in repo_atoms])
        guard = _drop_redundant_occupancy(parts + eff.guard)
        params = [p for p in scope.params if p.kind == L.IVAR or p not in m]
        used = set()
        for f in guard:
            used |= L.terms_of(f)
        for t in eff.assign.values():
            used |= set(L.subterms(t))
        for upd in eff.updates:
            for c in upd.cases:
                used |= L.terms_of(c.cond)
                for _, t in c.values:
                    used |= set(L.subterms(t))
                if c.index is not None:
                    used.add(c.index)
        params = [p for p in params if p in used]
        witness = {n: env[n] for n, _ in u.pre.answer + u.inputs}
        out.append(_Spec(params, guard, eff.assign, eff.updates, witness, eff.template))
    return out


# -- blocks ------------------------------------------------------------------

class _Builder:
    def __init__(self, dab: DAB, sig: L.Signature, options: frozenset):
        self.dab = dab
        self.schema = dab.schema
        self.sig = sig
        self.options = options
        self.rules: list = []
        self.hidden: dict = {}
        self.flags: dict = {}
        self.par = B.parents(dab.root)
        self.absorbed: set = set()
        self.fused: set = set()

    # helpers
    def st(self, b: B.Block, s: str):
        return L.eq(control_var(b), state(s))

    def enable(self, b: B.Block) -> tuple:
        """(var, value) that activates a child; an empty block completes at once."""
        return control_var(b), state(B.COMPLETED if b.kind == B.EMPTY else B.ENABLED)

    def cond(self, g: Optional[Q.Guard]):
        if g is None:
            return L.TRUE
        alts = []
        for q in g.disjuncts:
            scope = _Scope(self.schema, "cond")
            parts, _ = translate_cq(q, self.schema, self.sig, scope)
            alts.append(L.conj(parts))
        return L.disj(alts)

    def second(self, b: B.Block):
        return self.cond(b.phi2) if b.phi2 is not None else L.neg(self.cond(b.phi1))

    def emit(self, b: B.Block, k, guard, sets, spec: Optional[U.UpdateSpec] = None, hidden_in: bool = False,
             store: bool = False, base: Optional[str] = None):
        name = base or f"{b.name}.T{k}"
        sems = self.dab.semantics
        if spec is not None and hidden_in:
            specs = [self._from_hidden(b, spec)]
        else:
            specs = translate_spec(spec, self.schema, self.sig, sems)
        for i, sp in enumerate(specs):
            assign = dict(sets)
            if not store:
                for x, t in sp.assign.items():
                    if x in assign:
                        raise TranslationError(f"{name} assigns {x.name} twice")
                    assign[x] = t
            else:
                for n, t in sp.witness.items():
                    assign[self._hidden(b, n, t.sort)] = t
            g = L.conj([guard] + sp.guard)
            if g == L.FALSE and spec is not None and len(specs) > 1:
                continue
            rname = name if len(specs) == 1 else f"{name}.d{i}"
            upd = [] if store else sp.updates
            tmpl = "control" if store else sp.template
            self.rules.append(Rule(rname, b.name, name, tuple(sp.params), g,
                                   tuple(assign.items()), tuple(upd), tuple(sp.witness.items()),
                                   spec.name if spec is not None else None, tmpl))
        if not specs:
            # an unsatisfiable precondition still yields the rule, with a false guard
            self.rules.append(Rule(name, b.name, name, (), L.FALSE, tuple(sets.items()), (), (),
                                   spec.name if spec is not None else None))

    def _hidden(self, b: B.Block, n: str, sort: str) -> L.Term:
        key = f"{b.name}.{n}"
        if key not in self.hidden:
            self.hidden[key] = L.var(key, sort)
        return self.hidden[key]

    def _from_hidden(self, b: B.Block, u: U.UpdateSpec) -> _Spec:
        scope = _Scope(self.schema, u.name)
        env = {n: self._hidden(b, n, s) for n, s in u.pre.answer + u.inputs}
        eff = translate_effect(u, self.schema, self.sig, self.dab.semantics, scope, env, [])
        return _Spec(list(scope.params), eff.guard, eff.assign, eff.updates, {}, eff.template)

    def flag(self, b: B.Block) -> L.Term:
        if b.name not in self.flags:
            self.flags[b.name] = L.var(f"{b.name}.flag", FLAG)
        return self.flags[b.name]

    def idle_all(self, blocks) -> dict:
        return {control_var(h): state(B.IDLE) for h in blocks}

    # per kind
    def block(self, b: B.Block) -> None:
        if b.name in self.absorbed:
            for c in b.subblocks:
                self.block(c)
            return
        fn = getattr(self, "_" + b.kind)
        fn(b)
        for c in b.subblocks:
            self.block(c)

    def _Empty(self, b):
        pass

    def _Task(self, b):
        if b.atomic:
            self.emit(b, 1, self.st(b, B.ENABLED), {control_var(b): state(B.COMPLETED)}, b.spec)
        else:
            self.emit(b, 1, self.st(b, B.ENABLED), {control_var(b): state(B.ACTIVE)}, b.spec, store=True)
            self.emit(b, 2, self.st(b, B.ACTIVE), {control_var(b): state(B.COMPLETED)}, b.spec, hidden_in=True)

    def _CatchEvent(self, b):
        if b.name in self.fused:
            return
        self.emit(b, 1, self.st(b, B.ENABLED), {control_var(b): state(B.COMPLETED)}, b.spec)

    def _ProcessBlock(self, b):
        inner = b.child("inner")
        self.emit(b, 1, self.st(b, B.ENABLED), dict([self.enable(inner), (control_var(b), state(B.WAITING))]),
                  b.start_spec)
        self.emit(b, 2, self.st(inner, B.COMPLETED),
                  {control_var(inner): state(B.IDLE), control_var(b): state(B.COMPLETED)}, b.end_spec)

    def _Subprocess(self, b):
        inner = b.child("inner")
        self.emit(b, 1, self.st(b, B.ENABLED), dict([self.enable(inner), (control_var(b), state(B.WAITING))]))
        self.emit(b, 2, self.st(inner, B.COMPLETED),
                  {control_var(inner): state(B.IDLE), control_var(b): state(B.COMPLETED)})

    def _Sequence(self, b):
        if NSEQ in self.options:
            items = self._flatten(b)
            if len(items) > 2:
                for c in _sequence_nodes(b):
                    if c is not b:
                        self.absorbed.add(c.name)
                self.emit(b, 1, self.st(b, B.ENABLED),
                          dict([self.enable(items[0]), (control_var(b), state(B.WAITING))]))
                for k in range(len(items) - 1):
                    self.emit(b, k + 2, self.st(items[k], B.COMPLETED),
                              dict([(control_var(items[k]), state(B.IDLE)), self.enable(items[k + 1])]))
                last = items[-1]
                self.emit(b, len(items) + 1, self.st(last, B.COMPLETED),
                          {control_var(last): state(B.IDLE), control_var(b): state(B.COMPLETED)})
                return
        b1, b2 = b.child("b1"), b.child("b2")
        self.emit(b, 1, self.st(b, B.ENABLED), dict([self.enable(b1), (control_var(b), state(B.WAITING))]))
        self.emit(b, 2, self.st(b1, B.COMPLETED), dict([(control_var(b1), state(B.IDLE)), self.enable(b2)]))
        self.emit(b, 3, self.st(b2, B.COMPLETED), {control_var(b2): state(B.IDLE), control_var(b): state(B.COMPLETED)})

    def _flatten(self, b):
        return flatten_sequence(b)

    def _PossibleCompletion(self, b):
        if b.name in self.fused:
            return
        v = control_var(b)
        inner = b.child("inner") if b.has("inner") else None
        if inner is not None:
            self.emit(b, 1, self.st(b, B.ENABLED), dict([self.enable(inner), (v, state(B.WAITING))]))
            done = self.st(inner, B.COMPLETED)
            reset = {control_var(inner): state(B.IDLE)}
        else:
            self.emit(b, 1, self.st(b, B.ENABLED), {v: state(B.WAITING)})
            done = self.st(b, B.WAITING)
            reset = {}
        self.emit(b, 2, L.conj([done, self.cond(b.phi1)]), {**reset, v: state(B.COMPLETED)})
        phi2 = self.second(b)
        if b.end_type == B.ERROR:
            catcher = B.error_catcher(self.dab.root, b)
            if catcher is None:
                raise TranslationError(f"no handler for error {b.label} raised by {b.name}")
            a = catcher.child("a")
            sets = self.idle_all(B.descendants(a))
            sets.update(reset)
            sets[control_var(a)] = state(B.ERR)
            self.emit(b, 3, L.conj([done, phi2]), sets)
        else:
            self.emit(b, 3, L.conj([done, phi2]), {**reset, v: state(B.COMPLETED)})

    def _Gateway2(self, b):
        b1, b2 = b.child("b1"), b.child("b2")
        v = control_var(b)
        if b.gtype == "parallel":
            self.emit(b, 1, self.st(b, B.ENABLED), dict([self.enable(b1), self.enable(b2), (v, state(B.WAITING))]))
            self.emit(b, 2, L.conj([self.st(b1, B.COMPLETED), self.st(b2, B.COMPLETED)]),
                      {control_var(b1): state(B.IDLE), control_var(b2): state(B.IDLE), v: state(B.COMPLETED)})
            return
        self.emit(b, 1, self.st(b, B.ENABLED), dict([self.enable(b1), (v, state(B.WAITING))]))
        self.emit(b, 2, self.st(b, B.ENABLED), dict([self.enable(b2), (v, state(B.WAITING))]))
        self.emit(b, 3, self.st(b1, B.COMPLETED), {control_var(b1): state(B.IDLE), v: state(B.COMPLETED)})
        self.emit(b, 4, self.st(b2, B.COMPLETED), {control_var(b2): state(B.IDLE), v: state(B.COMPLETED)})

    def _Choice(self, b):
        b1, b2 = b.child("b1"), b.child("b2")
        v = control_var(b)
        p1 = self.cond(b.phi1)
        p2 = self.second(b)
        en = self.st(b, B.ENABLED)
        if b.gtype == "inclusive":
            self.emit(b, 1, L.conj([en, p1, L.neg(p2)]), dict([self.enable(b1), (v, state(B.WAITING1))]))
            self.emit(b, 2, L.conj([en, p2, L.neg(p1)]), dict([self.enable(b2), (v, state(B.WAITING1))]))
            self.emit(b, 3, L.conj([en, p1, p2]), dict([self.enable(b1), self.enable(b2), (v, state(B.WAITING2))]))
            self.emit(b, 4, L.conj([self.st(b1, B.COMPLETED), self.st(b, B.WAITING1)]),
                      {control_var(b1): state(B.IDLE), v: state(B.COMPLETED)})
            self.emit(b, 5, L.conj([self.st(b, B.WAITING1), self.st(b2, B.COMPLETED)]),
                      {control_var(b2): state(B.IDLE), v: state(B.COMPLETED)})
            self.emit(b, 6, L.conj([self.st(b1, B.COMPLETED), self.st(b2, B.COMPLETED)]),
                      {control_var(b1): state(B.IDLE), control_var(b2): state(B.IDLE), v: state(B.COMPLETED)})
            return
        self.emit(b, 1, L.conj([en, p1]), dict([self.enable(b1), (v, state(B.WAITING))]))
        self.emit(b, 2, L.conj([en, p2]), dict([self.enable(b2), (v, state(B.WAITING))]))
        self.emit(b, 3, self.st(b1, B.COMPLETED), {control_var(b1): state(B.IDLE), v: state(B.COMPLETED)})
        self.emit(b, 4, self.st(b2, B.COMPLETED), {control_var(b2): state(B.IDLE), v: state(B.COMPLETED)})

    def _Loop(self, b):
        b1, b2 = b.child("b1"), b.child("b2")
        v = control_var(b)
        self.emit(b, 1, self.st(b, B.ENABLED), dict([self.enable(b1), (v, state(B.WAITING))]))
        self.emit(b, 2, L.conj([self.st(b1, B.COMPLETED), self.cond(b.phi1)]),
                  dict([(control_var(b1), state(B.IDLE)), self.enable(b2)]))
        self.emit(b, 3, self.st(b2, B.COMPLETED), dict([self.enable(b1), (control_var(b2), state(B.IDLE))]))
        self.emit(b, 4, L.conj([self.st(b1, B.COMPLETED), self.second(b)]),
                  {control_var(b1): state(B.IDLE), v: state(B.COMPLETED)})

    def _EventDrivenChoice(self, b):
        e1, e2, b1, b2 = (b.child(r) for r in ("e1", "e2", "b1", "b2"))
        v = control_var(b)
        fuse = ERREVENT in self.options and B.always_error(b2) and B.error_catcher(self.dab.root, b2) is not None
        self.emit(b, 1, self.st(b, B.ENABLED), dict([self.enable(e1), (v, state(B.WAITING))]))
        if not fuse:
            self.emit(b, 2, self.st(b, B.ENABLED), dict([self.enable(e2), (v, state(B.WAITING))]))
        self.emit(b, 3, self.st(e1, B.COMPLETED), dict([(control_var(e1), state(B.IDLE)), self.enable(b1)]))
        if not fuse:
            self.emit(b, 4, self.st(e2, B.COMPLETED), dict([(control_var(e2), state(B.IDLE)), self.enable(b2)]))
        self.emit(b, 5, self.st(b1, B.COMPLETED), {control_var(b1): state(B.IDLE), v: state(B.COMPLETED)})
        if not fuse:
            self.emit(b, 6, self.st(b2, B.COMPLETED), {control_var(b2): state(B.IDLE), v: state(B.COMPLETED)})
            return
        self.fused.update({e1.name, e2.name, b2.name})
        self.emit(b, "E1", self.st(e1, B.ENABLED), {control_var(e1): state(B.COMPLETED)}, e1.spec)
        a = B.error_catcher(self.dab.root, b2).child("a")
        sets = self.idle_all(B.descendants(a))
        sets[control_var(e1)] = state(B.IDLE)
        sets[control_var(a)] = state(B.ERR)
        self.emit(b, "E2", self.st(e1, B.ENABLED), sets, e2.spec)

    def _interrupts(self, b, a):
        if b.event_type not in (B.MSG, B.TIMER):
            return
        hs = self.idle_all(B.descendants(a))
        for k, s in enumerate((B.ENABLED, B.WAITING, B.ACTIVE), 1):
            sets = dict(hs)
            sets[control_var(a)] = state(B.ERR)
            self.emit(b, f"err{k}", self.st(a, s), sets)

    def _BackwardException(self, b):
        a, h = b.child("a"), b.child("handler")
        v = control_var(b)
        self.emit(b, 1, self.st(b, B.ENABLED), dict([self.enable(a), (v, state(B.WAITING))]))
        self.emit(b, 2, self.st(a, B.COMPLETED), {control_var(a): state(B.IDLE), v: state(B.COMPLETED)})
        self.emit(b, 3, self.st(a, B.ERR), dict([(control_var(a), state(B.IDLE)), self.enable(h)]))
        self._interrupts(b, a)

    def _ForwardException(self, b):
        a, b1, h = b.child("a"), b.child("b1"), b.child("handler")
        v = control_var(b)
        self.emit(b, 1, self.st(b, B.ENABLED), dict([self.enable(a), (v, state(B.WAITING))]))
        self.emit(b, 2, self.st(a, B.COMPLETED), dict([(control_var(a), state(B.IDLE)), self.enable(b1)]))
        self.emit(b, 3, self.st(b1, B.COMPLETED), {control_var(b1): state(B.IDLE), v: state(B.COMPLETED)})
        self.emit(b, 4, self.st(a, B.ERR), dict([(control_var(a), state(B.IDLE)), self.enable(h)]))
        self.emit(b, 5, self.st(h, B.COMPLETED), {control_var(h): state(B.IDLE), v: state(B.COMPLETED)})
        self._interrupts(b, a)

    def _NonInterruptingException(self, b):
        a, h = b.child("a"), b.child("handler")
        v = control_var(b)
        fl = self.flag(b)
        self.emit(b, 1, self.st(b, B.ENABLED), dict([self.enable(a), (v, state(B.WAITING))]))
        self.emit(b, 2, L.conj([self.st(a, B.COMPLETED), L.eq(fl, L.const("false", FLAG))]),
                  {control_var(a): state(B.IDLE), v: state(B.COMPLETED)})
        self.emit(b, 3, self.st(a, B.ERR), dict([self.enable(h), (fl, L.const("true", FLAG))]))
        self.emit(b, 4, L.conj([self.st(a, B.COMPLETED), self.st(h, B.COMPLETED)]),
                  {control_var(a): state(B.IDLE), control_var(h): state(B.IDLE), v: state(B.COMPLETED)})
        self._interrupts(b, a)


def _sequence_nodes(b: B.Block) -> list:
    out = [b]
    for c in (b.child("b1"), b.child("b2")):
        if c.kind == B.SEQUENCE:
            out.extend(_sequence_nodes(c))
    return out


def flatten_sequence(b: B.Block) -> list:
    """Leaves of a tree of nested sequences, in execution order."""
    out = []
    for c in (b.child("b1"), b.child("b2")):
        if c.kind == B.SEQUENCE:
            out.extend(flatten_sequence(c))
        else:
            out.append(c)
    return out


def translate_block(b: B.Block, dab: DAB, options=()) -> list:
    """Rules contributed by one block, without those of its sub-blocks."""
    _, sig = translate_schema(dab.schema, dab.root)
    bld = _Builder(dab, sig, frozenset(options))
    # fusion and absorption are decided by ancestors, so run over the whole tree
    bld.block(dab.root)
    return [r for r in bld.rules if r.block == b.name]


def translate_dab(dab: DAB, repo_bound: Optional[int] = None, options=()) -> TransitionSystem:
    options = frozenset(o.lower() for o in options)
    bad = options - set(OPTIONS)
    if bad:
        raise TranslationError(f"unknown optimization {sorted(bad)}")
    setting, sig = translate_schema(dab.schema, dab.root, repo_bound)
    bld = _Builder(dab, sig, options)
    bld.block(dab.root)
    hidden = dict(bld.hidden)
    for n, v in bld.flags.items():
        hidden[v.name] = v
    setting.variables = setting.variables + tuple(hidden.values())
    init = {}
    for v in setting.variables:
        init[v] = None
    for c in B.control_variables(dab.root):
        init[L.var(c, LIFECYCLE)] = B.IDLE
    init[control_var(dab.root)] = B.ENABLED
    for v in bld.flags.values():
        init[v] = "false"
    return TransitionSystem(dab, setting, sig, init, tuple(bld.rules), repo_bound, options, hidden)


# -- properties ----------------------------------------------------------------

@dataclass(frozen=True)
class StateFormula:
    """An existentially index-quantified conjunction of literals."""
    indexes: tuple
    lits: frozenset
    dvars: tuple = ()  # data variables still to be eliminated

    def formula(self):
        return L.conj(sorted(self.lits, key=L.show_lit))

    def show(self) -> str:
        pre = "".join(f"exists {L.show_term(e)}. " for e in self.indexes)
        return pre + L.show(self.formula())


def translate_property(p: Q.Guard, ts: TransitionSystem) -> list:
    """A property as a list of state formulas, one per DNF cube."""
    out = []
    schema = ts.dab.schema
    for q in p.disjuncts:
        scope = _Scope(schema, "p")
        parts, _ = translate_cq(q, schema, ts.sig, scope)
        parts, m = solve(parts)
        parts = _drop_redundant_occupancy(parts)
        for cube in L.dnf(L.conj(parts)):
            terms = set()
            for l in cube:
                terms |= L.terms_of(l)
            idx = tuple(e for e in scope.params if e.kind == L.IVAR and e in terms)
            dv = tuple(v for v in scope.params if v.kind == L.DVAR and v in terms)
            out.append(StateFormula(idx, frozenset(cube), dv))
    return out


# -- normal form ---------------------------------------------------------------

def is_normal_form(r: Rule, ts: TransitionSystem) -> bool:
    """Quantifier-free guard, each symbol assigned once, case-defined array updates."""
    variables = set(ts.variables)
    allowed = variables | set(r.params)

    def ok_term(t, extra=()):
        for s in L.subterms(t):
            if s.arg is None and s.kind != L.CONST and s not in allowed and s not in extra:
                return False
            if s.kind == L.APP and s.name not in ts.sig.functions:
                return False
            if s.kind == L.READ and s.name not in ts.sig.arrays:
                return False
        return True

    def ok_formula(f, extra=()):
        if f in (L.TRUE, L.FALSE):
            return True
        if len(f) == 3:
            return ok_term(f[1], extra) and ok_term(f[2], extra) and f[1].sort == f[2].sort
        if f[0] in ("and", "or"):
            return all(ok_formula(p, extra) for p in f[1])
        return False

    if not ok_formula(r.guard):
        return False
    xs = [x for x, _ in r.assign]
    if len(xs) != len(set(xs)) or not set(xs) <= variables:
        return False
    if any(not ok_term(t) or t.sort != x.sort for x, t in r.assign):
        return False
    rels = [u.relation for u in r.updates]
    if len(rels) != len(set(rels)):
        return False
    for u in r.updates:
        if u.relation not in ts.setting.index_sorts or u.j.sort != ts.setting.index_sorts[u.relation]:
            return False
        for c in u.cases:
            if c.index is not None and c.index not in r.params:
                return False
            if not ok_formula(c.cond, (u.j,)):
                return False
            for a, t in c.values:
                info = ts.setting.arrays.get(a)
                if info is None or info[0] != u.relation or t.sort != info[3] or not ok_term(t, (u.j,)):
                    return False
    return True


def rule_counts(ts: TransitionSystem) -> dict:
    """Number of rules per block, counting split disjuncts once."""
    out: dict = {}
    seen = set()
    for r in ts.rules:
        if r.base in seen:
            continue
        seen.add(r.base)
        out[r.block] = out.get(r.block, 0) + 1
    return out


def show_rule(r: Rule) -> str:
    lines = [f"rule {r.name}"]
    if r.params:
        lines.append("  exists " + ", ".join(L.show_term(p) + ":" + p.sort for p in r.params))
    lines.append("  if   " + L.show(r.guard))
    for x, t in r.assign:
        lines.append(f"  then {x.name}' := {L.show_term(t)}")
    for u in r.updates:
        j = L.show_term(u.j)
        for a in sorted({a for c in u.cases for a, _ in c.values}):
            parts = []
            for c in u.cases:
                v = c.value(a)
                if v is None:
                    continue
                cond = []
                if c.index is not None:
                    cond.append(f"{j} = {L.show_term(c.index)}")
                if c.cond != L.TRUE:
                    cond.append(L.show(c.cond))
                parts.append(f"if {' & '.join(cond) or 'true'} then {L.show_term(v)}")
            lines.append(f"  then {a}' := lambda {j}. " + " else ".join(parts) + f" else {a}[{j}]")
    return "\n".join(lines)


def show_system(ts: TransitionSystem) -> str:
    out = ["variables: " + ", ".join(f"{v.name}:{v.sort}" for v in ts.variables)]
    for a, (rel, attr, idx, srt) in ts.setting.arrays.items():
        out.append(f"array {a}: {idx} -> {srt}")
    out.append("initial: " + L.show(ts.initial_formula()) + " & every cell undef")
    for r in ts.rules:
        out.append(show_rule(r))
    return "\n".join(out)
