"""The model file: schema, updates, process tree, error labels and properties."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from . import blocks as B
from . import query as Q
from . import updates as U
from .schema import DataSchema, ValidationReport, Violation, report, schema_from_json, schema_to_json, validate_schema


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class DAB:
    schema: DataSchema
    root: B.Block
    updates: dict = field(default_factory=dict)
    error_labels: tuple = ()
    properties: dict = field(default_factory=dict)  # name -> Guard
    semantics: U.Semantics = U.Semantics()

    @property
    def block_names(self) -> list:
        return [b.name for b in B.walk(self.root)]

    def property(self, name: str) -> Q.Guard:
        try:
            return self.properties[name]
        except KeyError:
            raise ModelError(f"no property named {name}") from None

    def with_semantics(self, semantics: U.Semantics) -> "DAB":
        return DAB(self.schema, self.root, self.updates, self.error_labels, self.properties, semantics)

    def parse_property(self, text: str, name: str = "") -> Q.Guard:
        return Q.Guard(name, (), Q.parse_formula(text, self.schema, {}, self.block_names))


def _semantics(raw) -> U.Semantics:
    if not raw:
        return U.Semantics()
    keys = tuple((r, tuple(k)) for r, k in (raw.get("keys") or {}).items())
    return U.Semantics(raw.get("insertion", U.MULTISET), keys)


def _normalize_update(raw: dict) -> dict:
    raw = dict(raw)
    pre = raw.get("pre", "true")
    if isinstance(pre, str):
        pre = {"body": pre}
    raw["pre"] = pre
    return raw


def dab_from_json(raw: dict) -> DAB:
    try:
        schema = schema_from_json(raw.get("schema", {}))
    except (KeyError, TypeError, ValueError) as e:
        raise ModelError(f"schema: {e}") from None
    rep = validate_schema(schema)
    if not rep.ok:
        raise ModelError("schema violations: " + "; ".join(map(str, rep.violations)))
    updates = {}
    for u in raw.get("updates", []):
        try:
            spec = U.parse_update(_normalize_update(u), schema)
        except (Q.ParseError, KeyError, TypeError) as e:
            raise ModelError(f"update {u.get('name', '?')}: {e}") from None
        if spec.name in updates:
            raise ModelError(f"update {spec.name} declared twice")
        updates[spec.name] = spec
    proc = raw.get("process", raw.get("block"))
    if proc is None:
        raise ModelError("model has no process")
    controls = [n for n in B.block_names_json(proc) if n]
    try:
        root = B.block_from_json(proc, schema, updates, controls)
    except (B.BlockError, Q.ParseError, KeyError, TypeError) as e:
        raise ModelError(f"process: {e}") from None
    labels = tuple(raw.get("errorLabels", []))
    names = [b.name for b in B.walk(root)]
    props = {}
    for p in raw.get("properties", []):
        try:
            g = Q.Guard(p["name"], (), Q.parse_formula(p["formula"], schema, {}, names))
        except (Q.ParseError, KeyError) as e:
            raise ModelError(f"property {p.get('name', '?')}: {e}") from None
        props[p["name"]] = g
    if raw.get("cases", 1) != 1:
        raise ModelError("only single-case models are supported")
    return DAB(schema, root, updates, labels, props, _semantics(raw.get("semantics")))


def load_dab(path) -> DAB:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    return dab_from_json(raw)


def dab_to_json(d: DAB) -> dict:
    out = {
        "schema": schema_to_json(d.schema),
        "updates": [U.update_to_json(u) for u in d.updates.values()],
        "process": B.block_to_json(d.root),
        "errorLabels": list(d.error_labels),
        "properties": [{"name": n, "formula": Q.show_body(g)} for n, g in d.properties.items()],
    }
    if d.semantics != U.Semantics():
        out["semantics"] = {"insertion": d.semantics.mode, "keys": {r: list(k) for r, k in d.semantics.keys}}
    return out


def validate_dab(d: DAB) -> ValidationReport:
    rep = validate_schema(d.schema)
    rep = rep.merged(B.validate_process(d.root, d.schema, d.error_labels))
    out = []
    for n, g in d.properties.items():
        for v in Q.validate_property(g, d.schema, d.block_names).violations:
            out.append(Violation(v.clause, f"property {n}: {v.message}"))
    for r, k in d.semantics.keys:
        if not d.schema.is_repo(r):
            out.append(Violation("set-key", f"key declared for unknown repository relation {r}"))
        elif any(not (0 <= i < d.schema.relation(r).arity) for i in k):
            out.append(Violation("set-key", f"key of {r} names a missing attribute"))
    return rep.merged(report(out))


def load_instance(path) -> dict:
    raw = json.loads(Path(path).read_text())
    return raw.get("instances", raw)


def bundled(name: str) -> Path:
    return Path(str(resources.files("dabv") / "models" / name))


def hiring() -> DAB:
    return load_dab(bundled("hiring.json"))


def hiring_instance() -> dict:
    return load_instance(bundled("hiring_instance.json"))
