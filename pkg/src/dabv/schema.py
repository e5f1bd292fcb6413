"""Data schema: sorts, catalog, repository and case variables.

Also derives the functional view of the catalog (one unary function per
non-key attribute) and its characteristic graph.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import networkx as nx

ID = "id"
VALUE = "value"

UNBOUNDED = "unbounded"
FINITE = "finite"
ORDINAL = "ordinal"

RESERVED = {"undef"}


@dataclass(frozen=True)
class Domain:
    kind: str = UNBOUNDED
    values: tuple = ()
    lo: int = 0
    hi: int = 0

    @property
    def is_finite(self) -> bool:
        return self.kind != UNBOUNDED

    def elements(self) -> tuple:
        """Proper (non-undef) values of a finite domain."""
        if self.kind == FINITE:
            return self.values
        if self.kind == ORDINAL:
            return tuple(range(self.lo, self.hi + 1))
        raise ValueError("unbounded domain has no element list")

    def contains(self, value) -> bool:
        if self.kind == FINITE:
            return value in self.values
        if self.kind == ORDINAL:
            return isinstance(value, int) and not isinstance(value, bool) and self.lo <= value <= self.hi
        return True

    def to_json(self):
        if self.kind == FINITE:
            return {"finite": list(self.values)}
        if self.kind == ORDINAL:
            return {"ordinal": [self.lo, self.hi]}
        return UNBOUNDED


@dataclass(frozen=True)
class SortDecl:
    name: str
    kind: str = VALUE
    domain: Domain = field(default_factory=Domain)

    @property
    def is_ordinal(self) -> bool:
        return self.domain.kind == ORDINAL


@dataclass(frozen=True)
class CatalogRelation:
    name: str
    attributes: tuple  # ((attr, sort), ...); first is the primary key

    @property
    def key_sort(self) -> str:
        return self.attributes[0][1]

    @property
    def arity(self) -> int:
        return len(self.attributes)


@dataclass(frozen=True)
class RepoRelation:
    name: str
    attributes: tuple
    key: Optional[tuple] = None  # attribute positions, used under set insertion

    @property
    def arity(self) -> int:
        return len(self.attributes)

    def key_positions(self) -> tuple:
        return tuple(range(self.arity)) if self.key is None else tuple(self.key)


@dataclass(frozen=True)
class CaseVariable:
    name: str
    sort: str


@dataclass(frozen=True)
class Violation:
    clause: str
    message: str

    def __str__(self) -> str:
        return f"[{self.clause}] {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def merged(self, other: "ValidationReport") -> "ValidationReport":
        return report(self.violations + other.violations)

    def clauses(self) -> set:
        return {v.clause for v in self.violations}


def report(violations: Iterable[Violation]) -> ValidationReport:
    return ValidationReport(tuple(sorted(set(violations), key=lambda v: (v.clause, v.message))))


@dataclass(frozen=True)
class DataSchema:
    sorts: tuple = ()
    catalog: tuple = ()
    repo: tuple = ()
    case_vars: tuple = ()

    def sort(self, name: str) -> SortDecl:
        for s in self.sorts:
            if s.name == name:
                return s
        raise KeyError(f"unknown sort {name!r}")

    def has_sort(self, name: str) -> bool:
        return any(s.name == name for s in self.sorts)

    def relation(self, name: str):
        for r in self.catalog:
            if r.name == name:
                return r
        for r in self.repo:
            if r.name == name:
                return r
        raise KeyError(f"unknown relation {name!r}")

    def is_catalog(self, name: str) -> bool:
        return any(r.name == name for r in self.catalog)

    def is_repo(self, name: str) -> bool:
        return any(r.name == name for r in self.repo)

    def case_var(self, name: str) -> CaseVariable:
        for v in self.case_vars:
            if v.name == name:
                return v
        raise KeyError(f"unknown case variable {name!r}")

    def is_case_var(self, name: str) -> bool:
        return any(v.name == name for v in self.case_vars)

    def keyed_by(self, sort: str) -> Optional[CatalogRelation]:
        for r in self.catalog:
            if r.key_sort == sort:
                return r
        return None

    def constant_sorts(self, value) -> list:
        """Finite sorts whose domain declares `value`."""
        return [s.name for s in self.sorts if s.domain.is_finite and s.domain.contains(value)]


def validate_schema(schema: DataSchema) -> ValidationReport:
    out: list = []
    sort_names = [s.name for s in schema.sorts]
    for name in sorted({n for n in sort_names if sort_names.count(n) > 1}):
        out.append(Violation("duplicate-name", f"sort {name} declared twice"))
    known = set(sort_names)
    for s in schema.sorts:
        if s.name in RESERVED:
            out.append(Violation("reserved-name", f"sort name {s.name} is reserved"))
        if s.kind not in (ID, VALUE):
            out.append(Violation("sort-kind", f"sort {s.name} has kind {s.kind!r}"))
        if s.kind == ID and s.domain.is_finite:
            out.append(Violation("id-sort-domain", f"id-sort {s.name} must be unbounded"))
        if s.domain.kind == FINITE:
            if not s.domain.values:
                out.append(Violation("empty-domain", f"sort {s.name} has an empty domain"))
            if len(set(s.domain.values)) != len(s.domain.values):
                out.append(Violation("duplicate-constant", f"sort {s.name} repeats a constant"))
            if "undef" in s.domain.values:
                out.append(Violation("reserved-name", f"undef cannot be declared in sort {s.name}"))
        if s.domain.kind == ORDINAL and s.domain.lo > s.domain.hi:
            out.append(Violation("empty-domain", f"ordinal sort {s.name} has lo > hi"))

    rel_names = [r.name for r in schema.catalog] + [r.name for r in schema.repo]
    var_names = [v.name for v in schema.case_vars]
    spaces = sort_names + rel_names + var_names
    for name in sorted({n for n in spaces if spaces.count(n) > 1}):
        if sort_names.count(name) > 1:
            continue
        out.append(Violation("duplicate-name", f"name {name} is declared more than once"))

    id_sorts = {s.name for s in schema.sorts if s.kind == ID}
    key_owner: dict = {}
    for r in schema.catalog:
        if not r.attributes:
            out.append(Violation("PK-first", f"catalog relation {r.name} has no attributes"))
            continue
        for attr, sort in r.attributes:
            if sort not in known:
                out.append(Violation("unknown-sort", f"{r.name}.{attr} uses unknown sort {sort}"))
        if r.key_sort not in id_sorts:
            out.append(Violation("PK-first", f"first attribute of {r.name} must have an id-sort"))
            continue
        if r.key_sort in key_owner:
            out.append(Violation("key-sort ambiguity",
                                 f"{key_owner[r.key_sort]} and {r.name} share key sort {r.key_sort}"))
        else:
            key_owner[r.key_sort] = r.name
        names = [a for a, _ in r.attributes]
        if len(set(names)) != len(names):
            out.append(Violation("duplicate-name", f"{r.name} repeats an attribute name"))
    for r in schema.catalog:
        for attr, sort in r.attributes[1:]:
            if sort in id_sorts and sort not in key_owner:
                out.append(Violation("dangling FK", f"{r.name}.{attr} references id-sort {sort} with no catalog relation"))
    for s in sorted(id_sorts - set(key_owner)):
        out.append(Violation("id-sort without relation", f"id-sort {s} is not the key of any catalog relation"))

    repo_names = {r.name for r in schema.repo}
    for r in schema.repo:
        if not r.attributes:
            out.append(Violation("empty-relation", f"repository relation {r.name} has no attributes"))
        for attr, sort in r.attributes:
            if sort in repo_names:
                out.append(Violation("repo-to-repo reference", f"{r.name}.{attr} refers to repository relation {sort}"))
            elif sort not in known:
                out.append(Violation("unknown-sort", f"{r.name}.{attr} uses unknown sort {sort}"))
            elif sort in id_sorts and sort not in key_owner:
                out.append(Violation("dangling FK", f"{r.name}.{attr} references id-sort {sort} with no catalog relation"))
        if r.key is not None:
            if not r.key or any(not 0 <= k < r.arity for k in r.key) or len(set(r.key)) != len(r.key):
                out.append(Violation("set-key", f"{r.name} declares an invalid key {list(r.key)}"))
        names = [a for a, _ in r.attributes]
        if len(set(names)) != len(names):
            out.append(Violation("duplicate-name", f"{r.name} repeats an attribute name"))

    for v in schema.case_vars:
        if v.sort not in known:
            out.append(Violation("unknown-sort", f"case variable {v.name} uses unknown sort {v.sort}"))
        elif v.sort in id_sorts and v.sort not in key_owner:
            out.append(Violation("case-var id-sort without catalog target",
                                 f"case variable {v.name} has id-sort {v.sort} with no catalog relation"))
    return report(out)


@dataclass(frozen=True)
class UnaryFunction:
    name: str
    source: str
    target: str
    relation: str
    attribute: str


@dataclass(frozen=True)
class FunctionalView:
    functions: tuple = ()

    def lookup(self, relation: str, attribute: str) -> UnaryFunction:
        for f in self.functions:
            if f.relation == relation and f.attribute == attribute:
                return f
        raise KeyError((relation, attribute))

    def by_name(self, name: str) -> UnaryFunction:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def of_relation(self, relation: str) -> list:
        return [f for f in self.functions if f.relation == relation]


def function_name(relation: str, attribute: str) -> str:
    return f"f_{relation}_{attribute}"


def functional_view(catalog: Iterable[CatalogRelation]) -> FunctionalView:
    fs = []
    for r in catalog:
        for attr, sort in r.attributes[1:]:
            fs.append(UnaryFunction(function_name(r.name, attr), r.key_sort, sort, r.name, attr))
    return FunctionalView(tuple(fs))


def characteristic_graph(catalog: Iterable[CatalogRelation]) -> nx.DiGraph:
    """Nodes are (relation, attribute) pairs.

    Edges go from a key to every other attribute of its relation, and from a
    foreign-key attribute to the key of the relation it references.
    """
    catalog = list(catalog)
    g = nx.DiGraph()
    keyed = {r.key_sort: r for r in catalog if r.attributes}
    for r in catalog:
        for attr, _ in r.attributes:
            g.add_node((r.name, attr))
    for r in catalog:
        if not r.attributes:
            continue
        key = (r.name, r.attributes[0][0])
        for attr, sort in r.attributes[1:]:
            g.add_edge(key, (r.name, attr))
            target = keyed.get(sort)
            if target is not None:
                g.add_edge((r.name, attr), (target.name, target.attributes[0][0]))
    return g


def is_acyclic(g: nx.DiGraph) -> bool:
    return nx.is_directed_acyclic_graph(g)


def find_cycle(g: nx.DiGraph) -> Optional[list]:
    try:
        return [u for u, _ in nx.find_cycle(g)]
    except nx.NetworkXNoCycle:
        return None


# -- JSON ------------------------------------------------------------------

def _domain_from_json(raw) -> Domain:
    if raw is None or raw == UNBOUNDED:
        return Domain()
    if isinstance(raw, dict):
        if FINITE in raw:
            return Domain(FINITE, tuple(raw[FINITE]))
        if ORDINAL in raw:
            lo, hi = raw[ORDINAL]
            return Domain(ORDINAL, (), int(lo), int(hi))
    raise ValueError(f"bad sort domain {raw!r}")


def schema_from_json(raw: dict) -> DataSchema:
    sorts = tuple(SortDecl(s["name"], s.get("kind", VALUE), _domain_from_json(s.get("domain")))
                  for s in raw.get("sorts", []))
    catalog = tuple(CatalogRelation(r["name"], tuple((a, s) for a, s in r["attrs"]))
                    for r in raw.get("catalog", []))
    repo = tuple(RepoRelation(r["name"], tuple((a, s) for a, s in r["attrs"]),
                              tuple(r["key"]) if r.get("key") is not None else None)
                 for r in raw.get("repo", []))
    case_vars = tuple(CaseVariable(n, s) for n, s in raw.get("caseVars", []))
    return DataSchema(sorts, catalog, repo, case_vars)


def schema_to_json(schema: DataSchema) -> dict:
    return {
        "sorts": [{"name": s.name, "kind": s.kind, "domain": s.domain.to_json()} for s in schema.sorts],
        "catalog": [{"name": r.name, "attrs": [list(a) for a in r.attributes]} for r in schema.catalog],
        "repo": [dict({"name": r.name, "attrs": [list(a) for a in r.attributes]},
                      **({"key": list(r.key)} if r.key is not None else {})) for r in schema.repo],
        "caseVars": [[v.name, v.sort] for v in schema.case_vars],
    }
