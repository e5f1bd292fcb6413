"""Conditions, conjunctive queries, guards and properties.

Surface syntax is an S-expression:

    (and (rel Application jc u s e) (= e true))
    (or (and ...) (and ...))          ; disjunction only at top level
    (not (rel User $uid n a))         ; negation only of atoms

Case variables are written ``$name`` and control variables ``$<Block>lifecycle``.
A bare symbol is a constant when some finite sort declares it (or it names a
lifecycle state), otherwise a variable.  Integers are constants of a
bounded-ordinal sort.  Sorts of variables are inferred by unification.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .schema import DataSchema, ValidationReport, Violation, report

LIFECYCLE = "Lifecycle"
STATES = ("idle", "enabled", "active", "waiting", "waiting1", "waiting2", "completed", "error")
CONTROL_SUFFIX = "lifecycle"


class ParseError(ValueError):
    pass


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str
    sort: str


@dataclass(frozen=True)
class CaseVar:
    name: str
    sort: str

    @property
    def is_control(self) -> bool:
        return self.sort == LIFECYCLE


@dataclass(frozen=True)
class Const:
    sort: str
    value: object


@dataclass(frozen=True)
class Undef:
    sort: str


Term = Union[Var, CaseVar, Const, Undef]


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term


@dataclass(frozen=True)
class Neq:
    left: Term
    right: Term


@dataclass(frozen=True)
class Rel:
    relation: str
    args: tuple
    positive: bool = True


@dataclass(frozen=True)
class Cmp:
    op: str  # one of < <= > >=
    left: Term
    right: Term


Atom = Union[Eq, Neq, Rel, Cmp]


@dataclass(frozen=True)
class ConjQuery:
    atoms: tuple = ()


@dataclass(frozen=True)
class Guard:
    name: str = ""
    answer: tuple = ()  # ((name, sort), ...)
    disjuncts: tuple = (ConjQuery(),)

    @property
    def is_true(self) -> bool:
        return len(self.disjuncts) == 1 and not self.disjuncts[0].atoms


TRUE_GUARD = Guard()


def term_sort(t: Term) -> str:
    return t.sort


def atom_terms(a: Atom) -> tuple:
    if isinstance(a, Rel):
        return a.args
    return (a.left, a.right)


def cq_vars(q: ConjQuery) -> list:
    out: list = []
    for a in q.atoms:
        for t in atom_terms(a):
            if isinstance(t, Var) and t not in out:
                out.append(t)
    return out


def cq_case_vars(q: ConjQuery) -> list:
    out: list = []
    for a in q.atoms:
        for t in atom_terms(a):
            if isinstance(t, CaseVar) and t not in out:
                out.append(t)
    return out


# -- tokenizer / reader ----------------------------------------------------

def _tokens(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            yield c, i
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield text[i:j], i
            i = j


def read_sexpr(text: str):
    """Read one S-expression into nested lists of (symbol, position) pairs."""
    toks = list(_tokens(text))
    if not toks:
        raise ParseError("empty expression")
    pos = 0

    def rd():
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of expression")
        tok, at = toks[pos]
        pos += 1
        if tok == "(":
            out = []
            while True:
                if pos >= len(toks):
                    raise ParseError(f"unclosed parenthesis at offset {at}")
                if toks[pos][0] == ")":
                    pos += 1
                    return out
                out.append(rd())
        if tok == ")":
            raise ParseError(f"unexpected ')' at offset {at}")
        return (tok, at)

    e = rd()
    if pos != len(toks):
        raise ParseError(f"trailing input at offset {toks[pos][1]}")
    return e


# -- parsing with sort inference -------------------------------------------

_CMP = ("<", "<=", ">", ">=")


class _Ctx:
    def __init__(self, schema: DataSchema, env: dict, controls: Optional[Iterable[str]]):
        self.schema = schema
        self.env = dict(env)
        self.controls = None if controls is None else set(controls)
        self.parent: dict = {}
        self.fixed: dict = {}
        self.cands: dict = {}
        self.ordinal_only: set = set()
        self.eq_ints: list = []
        self.n = 0

    def node(self) -> int:
        self.n += 1
        self.parent[self.n] = self.n
        return self.n

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb

    def fix(self, x, sort: str, where: str) -> None:
        self.fixed.setdefault(x, set()).add((sort, where))


def _is_int(tok: str) -> bool:
    return tok.lstrip("-").isdigit()


def _finite_constant_sorts(schema: DataSchema, tok: str) -> list:
    return [s.name for s in schema.sorts if s.domain.kind == "finite" and tok in s.domain.values]


def parse_formula(text: str, schema: DataSchema, env: Optional[dict] = None,
                  controls: Optional[Iterable[str]] = None) -> tuple:
    """Parse a body into a tuple of ConjQuery (a union of conjunctive queries).

    `env` fixes sorts of named variables (answer variables, row variables).
    `controls` lists allowed control-variable block names; None forbids them.
    """
    ctx = _Ctx(schema, env or {}, controls)
    e = read_sexpr(text)
    raw = _read_disjuncts(e)
    var_nodes: dict = {}
    occ: list = []  # raw disjuncts of raw atoms with term placeholders

    def term(tok_at, ) -> tuple:
        tok, at = tok_at if isinstance(tok_at, tuple) else (None, None)
        if tok is None:
            raise ParseError("expected a term, found a list")
        x = None
        if tok.startswith("$"):
            name = tok[1:]
            if schema.is_case_var(name):
                x = ctx.node()
                ctx.fix(x, schema.case_var(name).sort, tok)
                return ("case", name, x)
            if name.endswith(CONTROL_SUFFIX) and len(name) > len(CONTROL_SUFFIX):
                block = name[: -len(CONTROL_SUFFIX)]
                if ctx.controls is None or block not in ctx.controls:
                    raise ParseError(f"unknown control variable {tok} at offset {at}")
                x = ctx.node()
                ctx.fix(x, LIFECYCLE, tok)
                return ("case", name, x)
            raise ParseError(f"unknown case variable {tok} at offset {at}")
        if tok == "undef":
            x = ctx.node()
            return ("undef", None, x)
        if _is_int(tok):
            x = ctx.node()
            ctx.ordinal_only.add(x)
            return ("int", int(tok), x)
        sorts = _finite_constant_sorts(schema, tok)
        if tok in STATES:
            sorts.append(LIFECYCLE)
        if sorts and tok not in ctx.env:
            x = ctx.node()
            ctx.cands[x] = set(sorts)
            return ("const", tok, x)
        if not (tok[0].isalpha() or tok[0] == "_"):
            raise ParseError(f"bad symbol {tok!r} at offset {at}")
        if tok not in var_nodes:
            var_nodes[tok] = ctx.node()
            if tok in ctx.env:
                ctx.fix(var_nodes[tok], ctx.env[tok], tok)
        return ("var", tok, var_nodes[tok])

    for conj in raw:
        atoms = []
        for a in conj:
            atoms.append(_read_atom(a, term, ctx))
        occ.append(atoms)

    # resolve sorts per class
    classes: dict = {}
    for x in list(ctx.parent):
        classes.setdefault(ctx.find(x), []).append(x)
    sort_of: dict = {}
    for r, members in classes.items():
        fixed = set()
        where = []
        for m in members:
            for s, w in ctx.fixed.get(m, ()):
                fixed.add(s)
                where.append(w)
        if len(fixed) > 1:
            raise ParseError(f"sort clash {sorted(fixed)} among {sorted(set(where))}")
        cands = None
        for m in members:
            if m in ctx.cands:
                cands = set(ctx.cands[m]) if cands is None else cands & ctx.cands[m]
        if fixed:
            s = next(iter(fixed))
            if cands is not None and s not in cands:
                raise ParseError(f"constant not declared in sort {s}")
        elif cands:
            if len(cands) > 1:
                raise ParseError(f"ambiguous constant sort among {sorted(cands)}")
            s = next(iter(cands))
        elif cands is not None:
            raise ParseError("constants of different sorts compared")
        else:
            ords = [d.name for d in schema.sorts if d.domain.kind == "ordinal"]
            if any(m in ctx.ordinal_only for m in members) and len(ords) == 1:
                s = ords[0]
            else:
                names = sorted({w for m in members for w in _names_of(m, var_nodes)})
                raise ParseError(f"cannot infer the sort of {', '.join(names) or 'a term'}")
        if any(m in ctx.ordinal_only for m in members):
            if s == LIFECYCLE or not schema.has_sort(s) or schema.sort(s).domain.kind != "ordinal":
                raise ParseError(f"integer or comparison used with non-ordinal sort {s}")
        for m in members:
            sort_of[m] = s
    for x, tag in ctx.eq_ints:
        s = sort_of[x]
        d = schema.sort(s).domain
        if not d.contains(tag):
            raise ParseError(f"integer {tag} outside the domain of {s}")

    def mk(t) -> Term:
        kind, v, x = t
        s = sort_of[x]
        if kind == "case":
            return CaseVar(v, s)
        if kind == "undef":
            return Undef(s)
        if kind in ("int", "const"):
            return Const(s, v)
        return Var(v, s)

    out = []
    for atoms in occ:
        built = []
        for a in atoms:
            k = a[0]
            if k == "rel":
                built.append(Rel(a[1], tuple(mk(t) for t in a[2]), a[3]))
            elif k == "eq":
                built.append(Eq(mk(a[1]), mk(a[2])))
            elif k == "neq":
                built.append(Neq(mk(a[1]), mk(a[2])))
            else:
                built.append(Cmp(a[1], mk(a[2]), mk(a[3])))
        out.append(ConjQuery(tuple(built)))
    return tuple(out)


def _names_of(x, var_nodes: dict):
    for name, n in var_nodes.items():
        if n == x:
            yield name


def _read_disjuncts(e) -> list:
    if isinstance(e, tuple):
        if e[0] == "true":
            return [[]]
        if e[0] == "false":
            return []
        raise ParseError(f"expected a formula at offset {e[1]}")
    if not e:
        raise ParseError("empty list")
    head = e[0][0] if isinstance(e[0], tuple) else None
    if head == "or":
        out = []
        for d in e[1:]:
            out.extend(_read_conj(d))
        return out
    return _read_conj(e)


def _read_conj(e) -> list:
    if isinstance(e, tuple):
        if e[0] == "true":
            return [[]]
        if e[0] == "false":
            return []
        raise ParseError(f"expected a formula at offset {e[1]}")
    head = e[0][0] if e and isinstance(e[0], tuple) else None
    if head == "or":
        raise ParseError(f"disjunction is only allowed at top level (offset {e[0][1]})")
    if head == "and":
        atoms = []
        for p in e[1:]:
            if isinstance(p, tuple) and p[0] == "true":
                continue
            if isinstance(p, tuple) and p[0] == "false":
                return []
            if isinstance(p, list) and p and isinstance(p[0], tuple) and p[0][0] == "and":
                inner = _read_conj(p)
                if not inner:
                    return []
                atoms.extend(inner[0])
                continue
            atoms.append(p)
        return [atoms]
    return [[e]]


def _read_atom(a, term, ctx: _Ctx) -> tuple:
    if isinstance(a, tuple):
        raise ParseError(f"expected an atom at offset {a[1]}")
    if not a or not isinstance(a[0], tuple):
        raise ParseError("malformed atom")
    head, at = a[0]
    if head == "not":
        if len(a) != 2 or isinstance(a[1], tuple):
            raise ParseError(f"'not' takes one atom (offset {at})")
        inner = _read_atom(a[1], term, ctx)
        if inner[0] == "rel":
            return ("rel", inner[1], inner[2], not inner[3])
        if inner[0] == "eq":
            return ("neq", inner[1], inner[2])
        if inner[0] == "neq":
            return ("eq", inner[1], inner[2])
        flip = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}
        raise ParseError(f"negated comparison at offset {at}; write ({flip[inner[1]]} ...) instead")
    if head == "rel":
        if len(a) < 2 or not isinstance(a[1], tuple):
            raise ParseError(f"rel needs a relation name (offset {at})")
        rname = a[1][0]
        try:
            rel = ctx.schema.relation(rname)
        except KeyError:
            raise ParseError(f"unknown relation {rname} at offset {a[1][1]}") from None
        args = [term(t) for t in a[2:]]
        if len(args) != rel.arity:
            raise ParseError(f"relation {rname} has arity {rel.arity}, got {len(args)} (offset {at})")
        for t, (_, s) in zip(args, rel.attributes):
            ctx.fix(t[2], s, rname)
        return ("rel", rname, args, True)
    if head in ("=", "distinct", "!=") or head in _CMP:
        if len(a) != 3:
            raise ParseError(f"{head} takes two terms (offset {at})")
        l, r = term(a[1]), term(a[2])
        ctx.union(l[2], r[2])
        if head == "=":
            for t in (l, r):
                if t[0] == "int":
                    ctx.eq_ints.append((t[2], t[1]))
            return ("eq", l, r)
        if head in ("distinct", "!="):
            for t in (l, r):
                if t[0] == "int":
                    ctx.eq_ints.append((t[2], t[1]))
            return ("neq", l, r)
        ctx.ordinal_only.add(l[2])
        return ("cmp", head, l, r)
    raise ParseError(f"unknown operator {head!r} at offset {at}")


def parse_guard(raw, schema: DataSchema, controls: Optional[Iterable[str]] = None,
                env: Optional[dict] = None) -> Guard:
    """Build a Guard from its JSON form.

    Accepts a bare body string, or a dict with "name", "answer" (list of
    names or [name, sort] pairs) and "body".
    """
    if isinstance(raw, str):
        raw = {"body": raw}
    name = raw.get("name", "")
    env = dict(env or {})
    answer_names = []
    for a in raw.get("answer", []):
        if isinstance(a, str):
            answer_names.append(a)
        else:
            n, s = a
            if not schema.has_sort(s):
                raise ParseError(f"unknown sort {s} for answer variable {n}")
            env[n] = s
            answer_names.append(n)
    disjuncts = parse_formula(raw.get("body", "true"), schema, env, controls)
    sorts = {}
    for q in disjuncts:
        for v in cq_vars(q):
            sorts[v.name] = v.sort
    answer = []
    for n in answer_names:
        if n in env:
            answer.append((n, env[n]))
        elif n in sorts:
            answer.append((n, sorts[n]))
        else:
            raise ParseError(f"answer variable {n} does not occur in the body and has no sort")
    return Guard(name, tuple(answer), disjuncts)


def parse_condition(text: str, schema: DataSchema, controls: Optional[Iterable[str]] = None) -> Guard:
    return Guard("", (), parse_formula(text, schema, {}, controls))


# -- printing ----------------------------------------------------------------

def show_term(t: Term) -> str:
    if isinstance(t, CaseVar):
        return "$" + t.name
    if isinstance(t, Undef):
        return "undef"
    if isinstance(t, Const):
        return str(t.value)
    return t.name


def show_atom(a: Atom) -> str:
    if isinstance(a, Rel):
        s = "(rel " + " ".join([a.relation] + [show_term(t) for t in a.args]) + ")"
        return s if a.positive else f"(not {s})"
    if isinstance(a, Eq):
        return f"(= {show_term(a.left)} {show_term(a.right)})"
    if isinstance(a, Neq):
        return f"(distinct {show_term(a.left)} {show_term(a.right)})"
    return f"({a.op} {show_term(a.left)} {show_term(a.right)})"


def show_cq(q: ConjQuery) -> str:
    if not q.atoms:
        return "true"
    if len(q.atoms) == 1:
        return show_atom(q.atoms[0])
    return "(and " + " ".join(show_atom(a) for a in q.atoms) + ")"


def show_body(g: Guard) -> str:
    if not g.disjuncts:
        return "false"
    if len(g.disjuncts) == 1:
        return show_cq(g.disjuncts[0])
    return "(or " + " ".join(show_cq(q) for q in g.disjuncts) + ")"


def guard_to_json(g: Guard) -> dict:
    out = {"body": show_body(g)}
    if g.name:
        out["name"] = g.name
    if g.answer:
        out["answer"] = [[n, s] for n, s in g.answer]
    return out


# -- analyses ----------------------------------------------------------------

def free_vars(g: Guard) -> tuple:
    """(non-case variables, case variables), each in first-occurrence order."""
    norm: list = []
    case: list = []
    for q in g.disjuncts:
        for v in cq_vars(q):
            if v.name not in norm:
                norm.append(v.name)
        for v in cq_case_vars(q):
            if v.name not in case:
                case.append(v.name)
    for n, _ in g.answer:
        if n not in norm:
            norm.append(n)
    return tuple(norm), tuple(case)


def is_repo_free(g: Guard, schema: DataSchema) -> bool:
    return not any(isinstance(a, Rel) and schema.is_repo(a.relation)
                   for q in g.disjuncts for a in q.atoms)


def is_boolean(g: Guard) -> bool:
    return not g.answer


def mentions_repo(q: ConjQuery, schema: DataSchema) -> bool:
    return any(isinstance(a, Rel) and schema.is_repo(a.relation) for a in q.atoms)


@dataclass(frozen=True)
class SeparationReport:
    ok: bool
    clause: str = ""
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _atom_vars(a: Atom) -> set:
    return {t.name for t in atom_terms(a) if isinstance(t, Var)}


def _atom_has_case(a: Atom) -> bool:
    return any(isinstance(t, CaseVar) for t in atom_terms(a))


def split_separated(q: ConjQuery, schema: DataSchema):
    """Split a disjunct into (chi, repo atom or None, xi), or raise SeparationReport."""
    repo = [a for a in q.atoms if isinstance(a, Rel) and schema.is_repo(a.relation)]
    if any(not a.positive for a in repo):
        raise _Sep("negated-repo", "negated repository atom")
    if len(repo) > 1:
        raise _Sep("single-repo-atom", f"{len(repo)} repository atoms in one disjunct")
    r = repo[0] if repo else None
    rest = [a for a in q.atoms if a is not r]
    # connected components over shared variables; components touching a
    # case variable (or ground atoms) make up chi, the others xi
    comp = list(range(len(rest)))

    def find(i):
        while comp[i] != i:
            comp[i] = comp[comp[i]]
            i = comp[i]
        return i

    for i in range(len(rest)):
        for j in range(i + 1, len(rest)):
            if _atom_vars(rest[i]) & _atom_vars(rest[j]):
                comp[find(i)] = find(j)
    chi_roots = {find(i) for i, a in enumerate(rest) if _atom_has_case(a) or not _atom_vars(a)}
    chi = [a for i, a in enumerate(rest) if find(i) in chi_roots]
    xi = [a for i, a in enumerate(rest) if find(i) not in chi_roots]
    if r is not None:
        if any(isinstance(t, CaseVar) for t in r.args):
            raise _Sep("repo-case-var", f"case variable inside {r.relation} atom")
        yv = {t.name for t in r.args if isinstance(t, Var)}
        chiv = set().union(*(_atom_vars(a) for a in chi)) if chi else set()
        if yv & chiv:
            raise _Sep("repo-chi-overlap", f"variables {sorted(yv & chiv)} shared with case-variable part")
    return chi, r, xi


class _Sep(Exception):
    def __init__(self, clause: str, message: str):
        super().__init__(message)
        self.clause = clause
        self.message = message


def is_separated(g: Guard, schema: DataSchema) -> SeparationReport:
    seen: dict = {}
    for i, q in enumerate(g.disjuncts):
        for v in cq_vars(q):
            if seen.get(v.name, i) != i:
                return SeparationReport(False, "disjoint-vars", f"variable {v.name} shared by two disjuncts")
            seen[v.name] = i
        try:
            split_separated(q, schema)
        except _Sep as e:
            return SeparationReport(False, e.clause, e.message)
    return SeparationReport(True)


def validate_guard(g: Guard, schema: DataSchema, strict: bool = False) -> ValidationReport:
    out = []
    names = [n for n, _ in g.answer]
    if len(set(names)) != len(names):
        out.append(Violation("answer-duplicate", f"guard {g.name} repeats an answer variable"))
    occurring = [{v.name for v in cq_vars(q)} for q in g.disjuncts]
    # answer variables absent from every disjunct are typed external inputs
    mentioned = set().union(*({v.name for v in cq_vars(q)} for q in g.disjuncts)) if g.disjuncts else set()
    if g.disjuncts and set(names) & mentioned:
        need = set(names) & mentioned
        if strict:
            if not all(need <= o for o in occurring):
                out.append(Violation("answer-vars", f"answer variables of {g.name} missing from some disjunct"))
        elif not any(need <= o for o in occurring):
            out.append(Violation("answer-vars", f"answer variables of {g.name} occur in no disjunct together"))
    for q in g.disjuncts:
        for a in q.atoms:
            if isinstance(a, Rel) and schema.is_repo(a.relation) and not a.positive:
                out.append(Violation("negated-repo", f"negated repository atom {a.relation} in {g.name}"))
    return report(out)


def control_blocks(g: Guard) -> set:
    out = set()
    for q in g.disjuncts:
        for v in cq_case_vars(q):
            if v.is_control:
                out.add(v.name[: -len(CONTROL_SUFFIX)])
    return out


def validate_property(p: Guard, schema: DataSchema, blocks: Iterable[str]) -> ValidationReport:
    """Each variable must occur in a repo atom, or a catalog atom keyed by a case variable."""
    out = []
    for b in sorted(control_blocks(p) - set(blocks)):
        out.append(Violation("unknown-block", f"control variable for unknown block {b}"))
    if p.answer:
        out.append(Violation("property-head", "properties have no answer variables"))
    for q in p.disjuncts:
        anchored = set()
        for a in q.atoms:
            if isinstance(a, Rel) and a.positive:
                if schema.is_repo(a.relation):
                    anchored |= _atom_vars(a)
                elif a.args and isinstance(a.args[0], CaseVar):
                    anchored |= _atom_vars(a)
        for v in cq_vars(q):
            if v.name not in anchored:
                out.append(Violation("unanchored-var", f"variable {v.name} occurs in no suitable relational atom"))
    return report(out)


def is_condition(g: Guard, schema: DataSchema) -> bool:
    """Variable-free and repo-free: only case variables, constants and catalog atoms."""
    return all(not cq_vars(q) for q in g.disjuncts) and is_repo_free(g, schema)
