"""Terms, literals and quantifier-free formulas of the symbolic layer.

Terms are hash-consed: structurally equal terms are the same object, so
identity comparison and the default hash are sound.  Literals are tuples
``(op, a, b)``; formulas are literals, ``("and", parts)``, ``("or", parts)``,
``TRUE`` or ``FALSE``.

Comparison literals follow the undef convention of the model language: a
comparison holds only when both sides are proper values, so ``!<`` (not
less-than) is kept as its own operator rather than rewritten to ``>=``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

VAR, CONST, APP, READ, IVAR, DVAR = "v", "c", "f", "r", "i", "d"

EQ, NE, LT, LE, NLT, NLE = "=", "!=", "<", "<=", "!<", "!<="
NEGATE = {EQ: NE, NE: EQ, LT: NLT, LE: NLE, NLT: LT, NLE: LE}
CMP_OPS = (LT, LE, NLT, NLE)

TRUE = ("true",)
FALSE = ("false",)


class Term:
    __slots__ = ("kind", "name", "sort", "arg", "key", "depth", "__weakref__")

    def __repr__(self) -> str:
        return show_term(self)

    def __lt__(self, other: "Term") -> bool:
        return self.key < other.key


_TABLE: dict = {}


def _mk(kind: str, name, sort: str, arg: Optional[Term]) -> Term:
    k = (kind, name, sort, arg)
    t = _TABLE.get(k)
    if t is None:
        t = Term()
        t.kind, t.name, t.sort, t.arg = kind, name, sort, arg
        if arg is None:
            t.key = f"{kind}:{sort}:{name!r}" if kind == CONST else f"{kind}:{name}"
            t.depth = 0
        else:
            t.key = f"{kind}:{name}({arg.key})"
            t.depth = arg.depth + 1
        _TABLE[k] = t
    return t


def var(name: str, sort: str) -> Term:
    return _mk(VAR, name, sort, None)


def const(value, sort: str) -> Term:
    return _mk(CONST, value, sort, None)


def undef(sort: str) -> Term:
    return _mk(CONST, None, sort, None)


def ivar(name: str, sort: str) -> Term:
    return _mk(IVAR, name, sort, None)


def dvar(name: str, sort: str) -> Term:
    return _mk(DVAR, name, sort, None)


def app(fn: str, arg: Term, sort: str) -> Term:
    """Catalog function application; f(undef) folds to undef."""
    if arg.kind == CONST and arg.name is None:
        return undef(sort)
    return _mk(APP, fn, sort, arg)


def read(array: str, idx: Term, sort: str) -> Term:
    return _mk(READ, array, sort, idx)


def is_undef(t: Term) -> bool:
    return t.kind == CONST and t.name is None


def is_const(t: Term) -> bool:
    return t.kind == CONST


def show_term(t: Term) -> str:
    if t.kind == CONST:
        return "undef" if t.name is None else str(t.name)
    if t.kind == VAR:
        return t.name
    if t.kind == IVAR:
        return "?" + t.name
    if t.kind == DVAR:
        return "@" + t.name
    if t.kind == APP:
        return f"{t.name}({show_term(t.arg)})"
    return f"{t.name}[{show_term(t.arg)}]"


def subterms(t: Term) -> Iterator[Term]:
    while t is not None:
        yield t
        t = t.arg


def root_of(t: Term) -> Term:
    while t.arg is not None:
        t = t.arg
    return t


def contains(t: Term, x: Term) -> bool:
    while t is not None:
        if t is x:
            return True
        t = t.arg
    return False


# -- literals ----------------------------------------------------------------

def _cmp_value(op: str, a, b) -> bool:
    if a is None or b is None:
        return op in (NLT, NLE)
    if op == LT:
        return a < b
    if op == LE:
        return a <= b
    if op == NLT:
        return not a < b
    return not a <= b


def lit(op: str, a: Term, b: Term):
    """Build a literal, folding it to TRUE/FALSE when decidable."""
    if op in (EQ, NE):
        if a is b:
            return TRUE if op == EQ else FALSE
        if a.kind == CONST and b.kind == CONST:
            return FALSE if op == EQ else TRUE
        if b.key < a.key:
            a, b = b, a
        return (op, a, b)
    if a.kind == CONST and b.kind == CONST:
        return TRUE if _cmp_value(op, a.name, b.name) else FALSE
    if is_undef(a) or is_undef(b):
        return TRUE if op in (NLT, NLE) else FALSE
    if a is b:
        if op == LT:
            return FALSE
        if op == NLE:
            return lit(EQ, a, undef(a.sort))
        if op == NLT:
            return TRUE
        return lit(NE, a, undef(a.sort))
    return (op, a, b)


def eq(a: Term, b: Term):
    return lit(EQ, a, b)


def ne(a: Term, b: Term):
    return lit(NE, a, b)


def is_lit(f) -> bool:
    return len(f) == 3


def negate_lit(l):
    return lit(NEGATE[l[0]], l[1], l[2])


def show_lit(l) -> str:
    return f"{show_term(l[1])} {l[0]} {show_term(l[2])}"


# -- formulas ----------------------------------------------------------------

def conj(parts: Iterable) -> tuple:
    out = []
    seen = set()
    for p in parts:
        if p is TRUE or p == TRUE:
            continue
        if p is FALSE or p == FALSE:
            return FALSE
        items = p[1] if p[0] == "and" else (p,)
        for q in items:
            if q not in seen:
                seen.add(q)
                out.append(q)
    for q in out:
        if len(q) == 3 and (NEGATE[q[0]], q[1], q[2]) in seen:
            return FALSE
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return ("and", tuple(out))


def disj(parts: Iterable) -> tuple:
    out = []
    seen = set()
    for p in parts:
        if p is FALSE or p == FALSE:
            continue
        if p is TRUE or p == TRUE:
            return TRUE
        items = p[1] if p[0] == "or" else (p,)
        for q in items:
            if q not in seen:
                seen.add(q)
                out.append(q)
    for q in out:
        if len(q) == 3 and (NEGATE[q[0]], q[1], q[2]) in seen:
            return TRUE
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return ("or", tuple(out))


def neg(f) -> tuple:
    if f == TRUE:
        return FALSE
    if f == FALSE:
        return TRUE
    if len(f) == 3:
        return negate_lit(f)
    if f[0] == "and":
        return disj(neg(p) for p in f[1])
    if f[0] == "or":
        return conj(neg(p) for p in f[1])
    if f[0] == "not":
        return f[1]
    raise ValueError(f"bad formula {f!r}")


def implies(a, b) -> tuple:
    return disj([neg(a), b])


def literals(f) -> Iterator[tuple]:
    if len(f) == 3:
        yield f
    elif f[0] in ("and", "or"):
        for p in f[1]:
            yield from literals(p)


def terms_of(f) -> set:
    out: set = set()
    for l in literals(f):
        for t in (l[1], l[2]):
            out.update(subterms(t))
    return out


def show(f) -> str:
    if f == TRUE:
        return "true"
    if f == FALSE:
        return "false"
    if len(f) == 3:
        return show_lit(f)
    sep = " & " if f[0] == "and" else " | "
    return "(" + sep.join(show(p) for p in f[1]) + ")"


# -- substitution ------------------------------------------------------------

def subst_term(t: Term, m: dict, memo: Optional[dict] = None) -> Term:
    if memo is not None and t in memo:
        return memo[t]
    r = m.get(t)
    if r is None:
        if t.arg is None:
            r = t
        else:
            a = subst_term(t.arg, m, memo)
            if a is t.arg:
                r = t
            elif t.kind == APP:
                r = app(t.name, a, t.sort)
            else:
                r = read(t.name, a, t.sort)
    if memo is not None:
        memo[t] = r
    return r


def subst(f, m: dict, memo: Optional[dict] = None):
    if not m:
        return f
    if memo is None:
        memo = {}
    if len(f) == 3:
        return lit(f[0], subst_term(f[1], m, memo), subst_term(f[2], m, memo))
    if f[0] == "and":
        return conj(subst(p, m, memo) for p in f[1])
    if f[0] == "or":
        return disj(subst(p, m, memo) for p in f[1])
    return f


def subst_lits(lits: Iterable, m: dict, memo: Optional[dict] = None) -> Optional[list]:
    """Substitute in a conjunction of literals; None if it became false."""
    if memo is None:
        memo = {}
    out = []
    for l in lits:
        r = lit(l[0], subst_term(l[1], m, memo), subst_term(l[2], m, memo))
        if r == FALSE:
            return None
        if r != TRUE:
            out.append(r)
    return out


# -- DNF ---------------------------------------------------------------------

def _consistent_add(cube: frozenset, new: Iterable) -> Optional[frozenset]:
    s = set(cube)
    for l in new:
        if (NEGATE[l[0]], l[1], l[2]) in s:
            return None
        s.add(l)
    return frozenset(s)


def dnf(f, limit: int = 200000) -> list:
    """Disjunctive normal form as a list of literal frozensets.

    Cubes containing a literal and its negation are dropped eagerly, so
    case splits over the same condition do not multiply.
    """
    if f == TRUE:
        return [frozenset()]
    if f == FALSE:
        return []
    if len(f) == 3:
        return [frozenset([f])]
    if f[0] == "or":
        out = []
        seen = set()
        for p in f[1]:
            for c in dnf(p, limit):
                if c not in seen:
                    seen.add(c)
                    out.append(c)
        return out
    cubes = [frozenset()]
    lits_part = [p for p in f[1] if len(p) == 3]
    rest = [p for p in f[1] if len(p) != 3]
    c0 = _consistent_add(frozenset(), lits_part)
    if c0 is None:
        return []
    cubes = [c0]
    for p in rest:
        alts = dnf(p, limit)
        nxt = []
        seen = set()
        for c in cubes:
            for a in alts:
                m = _consistent_add(c, a)
                if m is not None and m not in seen:
                    seen.add(m)
                    nxt.append(m)
        cubes = nxt
        if len(cubes) > limit:
            raise OverflowError("DNF too large")
        if not cubes:
            return []
    return cubes


# -- signature ---------------------------------------------------------------

@dataclass(frozen=True)
class SortInfo:
    name: str
    values: Optional[tuple] = None  # proper values of a finite sort, None if infinite
    ordinal: bool = False
    has_undef: bool = True

    @property
    def finite(self) -> bool:
        return self.values is not None

    def carrier(self) -> tuple:
        """All values including undef (None) for finite sorts."""
        assert self.values is not None
        return self.values + ((None,) if self.has_undef else ())


@dataclass
class Signature:
    sorts: dict = field(default_factory=dict)
    functions: dict = field(default_factory=dict)  # name -> (source, target)
    arrays: dict = field(default_factory=dict)  # name -> (index sort, target)

    def sort(self, name: str) -> SortInfo:
        return self.sorts[name]

    def add_sort(self, info: SortInfo) -> None:
        self.sorts[info.name] = info

    def copy(self) -> "Signature":
        return Signature(dict(self.sorts), dict(self.functions), dict(self.arrays))


_fresh = itertools.count()


def fresh_name(base: str) -> str:
    return f"{base}#{next(_fresh)}"
