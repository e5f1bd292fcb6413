"""Update specifications: a guard plus an insert&set, delete&set or
conditional-update effect."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from . import query as Q
from .query import CaseVar, Const, Guard, ParseError, Undef, Var
from .schema import DataSchema, ValidationReport, Violation, report

MULTISET = "multiset"
SET = "set"


@dataclass(frozen=True)
class InsertSet:
    relation: Optional[str] = None
    tuple: Optional[tuple] = None
    sets: tuple = ()  # ((case var name, Term), ...)


@dataclass(frozen=True)
class DeleteSet:
    relation: str = ""
    tuple: tuple = ()
    sets: tuple = ()


@dataclass(frozen=True)
class RowSpec:
    terms: tuple


@dataclass(frozen=True)
class IfNode:
    filter: Guard
    then: Union["IfNode", RowSpec]
    orelse: Union["IfNode", RowSpec]


@dataclass(frozen=True)
class CondUpdate:
    relation: str
    row_vars: tuple  # ((name, sort), ...)
    tree: Union[IfNode, RowSpec]


Effect = Union[InsertSet, DeleteSet, CondUpdate]


@dataclass(frozen=True)
class UpdateSpec:
    name: str
    pre: Guard = Q.TRUE_GUARD
    eff: Effect = field(default_factory=InsertSet)
    inputs: tuple = ()  # fresh effect-local variables ((name, sort), ...)

    @property
    def sets(self) -> tuple:
        return getattr(self.eff, "sets", ())


@dataclass(frozen=True)
class Semantics:
    mode: str = MULTISET
    keys: tuple = ()  # ((relation, positions), ...) overrides under set insertion

    def key_of(self, schema: DataSchema, relation: str) -> tuple:
        for r, k in self.keys:
            if r == relation:
                return tuple(k)
        return schema.relation(relation).key_positions()


def touches_repo(eff: Effect) -> bool:
    if isinstance(eff, InsertSet):
        return eff.relation is not None
    return True


# -- parsing -----------------------------------------------------------------

def parse_term(tok, schema: DataSchema, env: dict, sort: str):
    """Parse one effect term against an expected sort."""
    if isinstance(tok, bool):
        tok = "true" if tok else "false"
    if isinstance(tok, int):
        t = Const(sort, tok)
    else:
        tok = str(tok)
        if tok == "undef":
            return Undef(sort)
        if tok.startswith("$"):
            name = tok[1:]
            if not schema.is_case_var(name):
                raise ParseError(f"unknown case variable {tok}")
            t = CaseVar(name, schema.case_var(name).sort)
        elif tok in env:
            t = Var(tok, env[tok])
        elif tok.lstrip("-").isdigit():
            t = Const(sort, int(tok))
        else:
            t = Const(sort, tok)
    if t.sort != sort:
        raise ParseError(f"term {tok} has sort {t.sort}, expected {sort}")
    if isinstance(t, Const):
        d = schema.sort(sort).domain
        if not d.is_finite or not d.contains(t.value):
            raise ParseError(f"constant {tok} is not declared in sort {sort}")
    return t


def _sets(raw, schema: DataSchema, env: dict) -> tuple:
    if raw is None:
        return ()
    items = raw.items() if isinstance(raw, dict) else raw
    out = []
    for name, val in items:
        name = name.lstrip("$")
        if not schema.is_case_var(name):
            raise ParseError(f"SET target {name} is not a case variable")
        out.append((name, parse_term(val, schema, env, schema.case_var(name).sort)))
    return tuple(out)


def _tuple(raw, schema: DataSchema, env: dict, relation: str) -> tuple:
    rel = schema.relation(relation)
    if len(raw) != rel.arity:
        raise ParseError(f"tuple for {relation} has {len(raw)} terms, expected {rel.arity}")
    return tuple(parse_term(x, schema, env, s) for x, (_, s) in zip(raw, rel.attributes))


def _tree(raw, schema: DataSchema, env: dict, relation: str):
    if isinstance(raw, list):
        return RowSpec(_tuple(raw, schema, env, relation))
    g = Q.parse_guard({"body": raw["if"]}, schema, env=env)
    return IfNode(g, _tree(raw["then"], schema, env, relation), _tree(raw["else"], schema, env, relation))


def parse_update(raw: dict, schema: DataSchema) -> UpdateSpec:
    name = raw["name"]
    pre = raw.get("pre", "true")
    pre = {"body": pre} if isinstance(pre, str) else dict(pre)
    pre.setdefault("name", name)
    pre = Q.parse_guard(pre, schema)
    env = dict(pre.answer)
    inputs = []
    for n, s in raw.get("inputs", []):
        if not schema.has_sort(s):
            raise ParseError(f"unknown sort {s} for input {n}")
        env[n] = s
        inputs.append((n, s))
    eff = raw.get("eff", {"kind": "insertSet"})
    kind = eff.get("kind")
    if kind == "insertSet":
        rel = eff.get("into")
        tup = _tuple(eff["tuple"], schema, env, rel) if rel is not None else None
        e = InsertSet(rel, tup, _sets(eff.get("set"), schema, env))
    elif kind == "deleteSet":
        rel = eff["from"]
        e = DeleteSet(rel, _tuple(eff["tuple"], schema, env, rel), _sets(eff.get("set"), schema, env))
    elif kind == "condUpdate":
        rel = eff["rel"]
        r = schema.relation(rel)
        rv = []
        for i, v in enumerate(eff["rowVars"]):
            if isinstance(v, str):
                rv.append((v, r.attributes[i][1]))
            else:
                rv.append((v[0], v[1]))
        env2 = dict(env)
        env2.update(rv)
        e = CondUpdate(rel, tuple(rv), _tree(eff["tree"], schema, env2, rel))
    else:
        raise ParseError(f"unknown effect kind {kind!r} in update {name}")
    return UpdateSpec(name, pre, e, tuple(inputs))


def _term_json(t):
    if isinstance(t, CaseVar):
        return "$" + t.name
    if isinstance(t, Undef):
        return "undef"
    if isinstance(t, Const):
        return t.value
    return t.name


def _tree_json(t):
    if isinstance(t, RowSpec):
        return [_term_json(x) for x in t.terms]
    return {"if": Q.show_body(t.filter), "then": _tree_json(t.then), "else": _tree_json(t.orelse)}


def update_to_json(u: UpdateSpec) -> dict:
    e = u.eff
    if isinstance(e, InsertSet):
        eff = {"kind": "insertSet"}
        if e.relation is not None:
            eff["into"] = e.relation
            eff["tuple"] = [_term_json(t) for t in e.tuple]
        if e.sets:
            eff["set"] = {n: _term_json(t) for n, t in e.sets}
    elif isinstance(e, DeleteSet):
        eff = {"kind": "deleteSet", "from": e.relation, "tuple": [_term_json(t) for t in e.tuple]}
        if e.sets:
            eff["set"] = {n: _term_json(t) for n, t in e.sets}
    else:
        eff = {"kind": "condUpdate", "rel": e.relation, "rowVars": [list(v) for v in e.row_vars],
               "tree": _tree_json(e.tree)}
    out = {"name": u.name, "pre": Q.guard_to_json(u.pre), "eff": eff}
    if u.inputs:
        out["inputs"] = [list(v) for v in u.inputs]
    return out


# -- validation --------------------------------------------------------------

def effect_terms(eff: Effect) -> list:
    out = []
    if isinstance(eff, (InsertSet, DeleteSet)):
        out.extend(eff.tuple or ())
        out.extend(t for _, t in eff.sets)
    else:
        def walk(n):
            if isinstance(n, RowSpec):
                out.extend(n.terms)
            else:
                walk(n.then)
                walk(n.orelse)
        walk(eff.tree)
    return out


def _tree_filters(n) -> list:
    if isinstance(n, RowSpec):
        return []
    return [n.filter] + _tree_filters(n.then) + _tree_filters(n.orelse)


def _tree_rows(n) -> list:
    if isinstance(n, RowSpec):
        return [n]
    return _tree_rows(n.then) + _tree_rows(n.orelse)


def validate_update(u: UpdateSpec, schema: DataSchema) -> ValidationReport:
    out = list(Q.validate_guard(u.pre, schema).violations)
    e = u.eff
    allowed = {n for n, _ in u.pre.answer} | {n for n, _ in u.inputs}
    if isinstance(e, CondUpdate):
        allowed |= {n for n, _ in e.row_vars}
    for t in effect_terms(e):
        if isinstance(t, Var) and t.name not in allowed:
            out.append(Violation("unbound-term", f"{u.name}: {t.name} is neither an answer, input nor row variable"))
    if isinstance(e, (InsertSet, DeleteSet)):
        targets = [n for n, _ in e.sets]
        if len(set(targets)) != len(targets):
            out.append(Violation("set-targets", f"{u.name}: a case variable is set twice"))
        if e.relation is not None:
            if not schema.is_repo(e.relation):
                out.append(Violation("repo-target", f"{u.name}: {e.relation} is not a repository relation"))
            else:
                r = schema.relation(e.relation)
                if len(e.tuple) != r.arity:
                    out.append(Violation("arity", f"{u.name}: tuple arity differs from {e.relation}"))
                else:
                    for t, (a, s) in zip(e.tuple, r.attributes):
                        if t.sort != s:
                            out.append(Violation("sort", f"{u.name}: {a} expects {s}"))
        if isinstance(e, InsertSet) and e.relation is None and not e.sets:
            out.append(Violation("empty-effect", f"{u.name}: neither INSERT nor SET"))
        for n, t in e.sets:
            if schema.is_case_var(n) and t.sort != schema.case_var(n).sort:
                out.append(Violation("sort", f"{u.name}: SET {n} has the wrong sort"))
    else:
        if not schema.is_repo(e.relation):
            out.append(Violation("repo-target", f"{u.name}: {e.relation} is not a repository relation"))
        else:
            r = schema.relation(e.relation)
            if len(e.row_vars) != r.arity:
                out.append(Violation("arity", f"{u.name}: {len(e.row_vars)} row variables for {e.relation}"))
            for (n, s), (_, s2) in zip(e.row_vars, r.attributes):
                if s != s2:
                    out.append(Violation("sort", f"{u.name}: row variable {n} expects {s2}"))
            for row in _tree_rows(e.tree):
                if len(row.terms) != r.arity:
                    out.append(Violation("arity", f"{u.name}: row spec arity differs from {e.relation}"))
        names = [n for n, _ in e.row_vars]
        clash = set(names) & ({n for n, _ in u.pre.answer} | set(Q.free_vars(u.pre)[0])
                              | {v.name for v in schema.case_vars})
        if clash or len(set(names)) != len(names):
            out.append(Violation("fresh-row-vars", f"{u.name}: row variables {sorted(clash)} are not fresh"))
        for g in _tree_filters(e.tree):
            if not Q.is_repo_free(g, schema):
                out.append(Violation("filter-repo-free", f"{u.name}: filter must be repo-free"))
    return report(out)


# -- theorem clauses -----------------------------------------------------------

@dataclass(frozen=True)
class TheoremClause:
    clause: str  # Clause1, Clause2a, Clause2b, Clause3, Clause4 or Violation
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.clause != "Violation"


def classify_update(u: UpdateSpec, schema: DataSchema, semantics: Semantics = Semantics()) -> TheoremClause:
    e = u.eff
    repo_free = Q.is_repo_free(u.pre, schema)
    all_cases = {v.name for v in schema.case_vars} <= {n for n, _ in u.sets}
    if isinstance(e, InsertSet) and e.relation is not None:
        if semantics.mode == SET:
            return TheoremClause("Violation", "set insertion compares tuples of the same relation")
        if repo_free:
            return TheoremClause("Clause1")
        return TheoremClause("Violation", "insert&set needs a repo-free precondition")
    if isinstance(e, InsertSet):
        if repo_free:
            return TheoremClause("Clause2a")
        sep = Q.is_separated(u.pre, schema)
        if sep and all_cases:
            return TheoremClause("Clause2b")
        return TheoremClause("Violation", "set rule needs a repo-free, or separated and total, precondition")
    if isinstance(e, DeleteSet):
        sep = Q.is_separated(u.pre, schema)
        if not sep:
            return TheoremClause("Violation", f"delete&set precondition not separated ({sep.clause})")
        if not all_cases:
            return TheoremClause("Violation", "delete&set must set every case variable")
        return TheoremClause("Clause3")
    if not repo_free or not Q.is_boolean(u.pre):
        return TheoremClause("Violation", "conditional update needs a repo-free boolean precondition")
    rowv = {n for n, _ in e.row_vars}
    for row in _tree_rows(e.tree):
        for t in row.terms:
            if isinstance(t, CaseVar) or (isinstance(t, Var) and t.name not in rowv):
                return TheoremClause("Violation", "row specs may only use row variables and constants")
    for g in _tree_filters(e.tree):
        names, cases = Q.free_vars(g)
        if cases or set(names) - rowv:
            return TheoremClause("Violation", "filters may only use row variables and constants")
    return TheoremClause("Clause4")
