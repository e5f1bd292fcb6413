"""Block-structured process trees and their structural checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from . import query as Q
from . import updates as U
from .query import Guard
from .schema import DataSchema, ValidationReport, Violation, report

EMPTY = "Empty"
TASK = "Task"
EVENT = "CatchEvent"
PROCESS = "ProcessBlock"
SUBPROCESS = "Subprocess"
SEQUENCE = "Sequence"
POSSIBLE = "PossibleCompletion"
GATEWAY = "Gateway2"
CHOICE = "Choice"
LOOP = "Loop"
EVENT_CHOICE = "EventDrivenChoice"
BACKWARD = "BackwardException"
FORWARD = "ForwardException"
NONINTERRUPTING = "NonInterruptingException"

KINDS = (EMPTY, TASK, EVENT, PROCESS, SUBPROCESS, SEQUENCE, POSSIBLE, GATEWAY, CHOICE,
         LOOP, EVENT_CHOICE, BACKWARD, FORWARD, NONINTERRUPTING)
EXCEPTION_KINDS = (BACKWARD, FORWARD, NONINTERRUPTING)

MSG, TIMER, NONE, ERROR = "msg", "timer", "none", "error"

IDLE, ENABLED, ACTIVE, WAITING, WAITING1, WAITING2, COMPLETED, ERR = Q.STATES


@dataclass(frozen=True)
class Block:
    name: str
    kind: str
    children: tuple = ()  # ((role, Block), ...)
    spec: Optional[U.UpdateSpec] = None
    atomic: bool = True
    event_type: Optional[str] = None
    start_type: str = NONE
    start_spec: Optional[U.UpdateSpec] = None
    end_type: str = NONE
    end_spec: Optional[U.UpdateSpec] = None
    phi1: Optional[Guard] = None
    phi2: Optional[Guard] = None
    gtype: Optional[str] = None
    label: Optional[str] = None

    def child(self, role: str) -> "Block":
        for r, b in self.children:
            if r == role:
                return b
        raise KeyError(f"block {self.name} has no {role}")

    def has(self, role: str) -> bool:
        return any(r == role for r, _ in self.children)

    @property
    def subblocks(self) -> tuple:
        return tuple(b for _, b in self.children)

    @property
    def control(self) -> str:
        return self.name + Q.CONTROL_SUFFIX


def walk(b: Block) -> Iterator[Block]:
    yield b
    for c in b.subblocks:
        yield from walk(c)


def descendants(b: Block) -> list:
    return [d for c in b.subblocks for d in walk(c)]


def parents(root: Block) -> dict:
    out = {}
    for b in walk(root):
        for c in b.subblocks:
            out[c.name] = b
    return out


def find_block(root: Block, name: str) -> Block:
    for b in walk(root):
        if b.name == name:
            return b
    raise KeyError(f"no block named {name}")


def subblocks_of_scope(b: Block) -> list:
    """Blocks reset when the protected region of an exception scope is interrupted.

    For exception blocks this is the protected block and all of its
    descendants; for other blocks, all proper descendants.
    """
    if b.kind in EXCEPTION_KINDS:
        a = b.child("a")
        return list(walk(a))
    return descendants(b)


def control_variables(root: Block) -> tuple:
    return tuple(sorted(b.control for b in walk(root)))


def error_catcher(root: Block, b: Block) -> Optional[Block]:
    """Nearest enclosing exception block catching b's error label inside its region."""
    par = parents(root)
    cur = b
    while cur.name in par:
        p = par[cur.name]
        if (p.kind in (BACKWARD, FORWARD) and p.event_type == ERROR and p.label == b.label
                and p.child("a") is cur):
            return p
        cur = p
    return None


def raises_error(b: Block) -> bool:
    return b.kind == POSSIBLE and b.end_type == ERROR


def always_error(b: Block) -> bool:
    """A possible-completion block that can only end in its error."""
    if not raises_error(b):
        return False
    inner_empty = not b.has("inner") or b.child("inner").kind == EMPTY
    return (inner_empty and b.phi1 is not None and not b.phi1.disjuncts
            and b.phi2 is not None and b.phi2.is_true)


def _specs(b: Block) -> list:
    return [s for s in (b.spec, b.start_spec, b.end_spec) if s is not None]


_ROLES = {
    EMPTY: (), TASK: (), EVENT: (), PROCESS: ("inner",), SUBPROCESS: ("inner",),
    SEQUENCE: ("b1", "b2"), POSSIBLE: ("inner",), GATEWAY: ("b1", "b2"), CHOICE: ("b1", "b2"),
    LOOP: ("b1", "b2"), EVENT_CHOICE: ("e1", "e2", "b1", "b2"), BACKWARD: ("a", "handler"),
    FORWARD: ("a", "b1", "handler"), NONINTERRUPTING: ("a", "b1", "handler"),
}


def validate_process(root: Block, schema: DataSchema, error_labels=()) -> ValidationReport:
    out = []
    names = [b.name for b in walk(root)]
    for n in sorted({n for n in names if names.count(n) > 1}):
        out.append(Violation("name-clash", f"block name {n} used more than once"))
    case_names = {v.name for v in schema.case_vars}
    for n in names:
        if n in case_names or n + Q.CONTROL_SUFFIX in case_names:
            out.append(Violation("name-clash", f"block {n} clashes with a case variable"))
    labels = set(error_labels)
    handled: dict = {}
    for b in walk(root):
        if b.kind not in KINDS:
            out.append(Violation("kind", f"block {b.name} has unknown kind {b.kind}"))
            continue
        roles = tuple(r for r, _ in b.children)
        need = _ROLES[b.kind]
        if b.kind == POSSIBLE:
            if roles not in ((), ("inner",)):
                out.append(Violation("children", f"{b.name} has children {roles}"))
        elif roles != need:
            out.append(Violation("children", f"{b.name} needs children {need}, has {roles}"))
            continue
        for s in _specs(b):
            out.extend(U.validate_update(s, schema).violations)
        if b.kind == TASK and not b.atomic and b.spec is not None and U.touches_repo(b.spec.eff):
            out.append(Violation("nonatomic-repo", f"nonatomic task {b.name} updates the repository"))
        if b.kind == TASK and not b.atomic and b.spec is not None and b.spec.inputs:
            out.append(Violation("nonatomic-inputs", f"nonatomic task {b.name} declares effect inputs"))
        if b.kind == EVENT and b.event_type not in (MSG, TIMER, NONE):
            out.append(Violation("event-type", f"event {b.name} has type {b.event_type}"))
        for phi in (b.phi1, b.phi2):
            if phi is not None and not Q.is_condition(phi, schema):
                out.append(Violation("condition", f"condition of {b.name} must be variable- and repo-free"))
        if b.kind == POSSIBLE:
            if b.end_type not in (ERROR, MSG, NONE):
                out.append(Violation("end-type", f"{b.name} has end type {b.end_type}"))
            if b.end_type == ERROR and b.label not in labels:
                out.append(Violation("dangling-label", f"{b.name} raises undeclared error {b.label}"))
            if b.phi1 is None:
                out.append(Violation("condition", f"{b.name} needs a completion condition"))
        if b.kind in (CHOICE, LOOP) and b.phi1 is None:
            out.append(Violation("condition", f"{b.name} needs a condition"))
        if b.kind == CHOICE and b.gtype not in ("exclusive", "inclusive"):
            out.append(Violation("gateway-type", f"{b.name} has gateway type {b.gtype}"))
        if b.kind == GATEWAY and b.gtype not in ("deferredChoice", "parallel"):
            out.append(Violation("gateway-type", f"{b.name} has gateway type {b.gtype}"))
        if b.kind == EVENT_CHOICE:
            if b.child("e1").kind != EVENT:
                out.append(Violation("event-choice", f"{b.name}: e1 must be a catch event"))
            if b.child("e2").kind != EVENT:
                out.append(Violation("event-choice", f"{b.name}: e2 must be a catch event"))
        if b.kind in EXCEPTION_KINDS:
            if b.kind == BACKWARD and b.child("a").kind != SUBPROCESS:
                out.append(Violation("exception-scope", f"{b.name}: protected block must be a subprocess"))
            if b.kind == NONINTERRUPTING:
                if b.event_type not in (MSG, TIMER):
                    out.append(Violation("event-type", f"{b.name}: non-interrupting events are msg or timer"))
                if b.child("b1").kind != EMPTY:
                    out.append(Violation("non-interrupting-b1", f"{b.name}: continuation must be empty"))
            elif b.event_type not in (MSG, TIMER, ERROR):
                out.append(Violation("event-type", f"{b.name} has event type {b.event_type}"))
            if b.event_type == ERROR:
                if b.label not in labels:
                    out.append(Violation("dangling-label", f"{b.name} handles undeclared error {b.label}"))
                handled[b.label] = handled.get(b.label, 0) + 1
    for lab, n in handled.items():
        if n > 1:
            out.append(Violation("label-handlers", f"error {lab} has {n} handlers"))
    for b in walk(root):
        if raises_error(b) and b.label in labels and error_catcher(root, b) is None:
            out.append(Violation("dangling-label", f"no enclosing handler catches {b.label} raised by {b.name}"))
    return report(out)


# -- JSON ----------------------------------------------------------------------

_KIND_NAMES = {
    "empty": EMPTY, "task": TASK, "event": EVENT, "process": PROCESS, "subprocess": SUBPROCESS,
    "sequence": SEQUENCE, "possibleCompletion": POSSIBLE, "gateway": GATEWAY, "choice": CHOICE,
    "loop": LOOP, "eventChoice": EVENT_CHOICE, "backwardException": BACKWARD,
    "forwardException": FORWARD, "nonInterruptingException": NONINTERRUPTING,
}
_JSON_KIND = {v: k for k, v in _KIND_NAMES.items()}


class BlockError(ValueError):
    pass


def block_from_json(raw: dict, schema: DataSchema, updates: dict, controls) -> Block:
    """Build a block tree; `updates` maps spec names to UpdateSpec."""
    if "block" in raw and "kind" not in raw:
        raw = raw["block"]
    try:
        kind = _KIND_NAMES[raw["kind"]]
    except KeyError:
        raise BlockError(f"unknown block kind {raw.get('kind')!r}") from None
    name = raw.get("name")
    if not name:
        raise BlockError("every block needs a name")

    def spec(key):
        s = raw.get(key)
        if s is None:
            return None
        if isinstance(s, dict):
            return U.parse_update(s, schema)
        if s not in updates:
            raise BlockError(f"block {name} refers to unknown update {s}")
        return updates[s]

    def sub(key):
        if key not in raw:
            raise BlockError(f"block {name} is missing {key}")
        return block_from_json(raw[key], schema, updates, controls)

    def cond(key):
        c = raw.get(key)
        return None if c is None else Q.parse_condition(c, schema, controls)

    if kind == SEQUENCE and "blocks" in raw:
        items = [block_from_json(x, schema, updates, controls) for x in raw["blocks"]]
        if len(items) < 2:
            raise BlockError(f"sequence {name} needs at least two blocks")
        acc = items[-1]
        for i in range(len(items) - 2, 0, -1):
            acc = Block(f"{name}.{i}", SEQUENCE, (("b1", items[i]), ("b2", acc)))
        return Block(name, SEQUENCE, (("b1", items[0]), ("b2", acc)))
    roles = _ROLES[kind]
    children = []
    for r in roles:
        if kind == POSSIBLE:
            if "inner" in raw:
                children.append((r, sub(r)))
            continue
        children.append((r, sub(r)))
    kw = dict(name=name, kind=kind, children=tuple(children))
    if kind in (TASK, EVENT):
        kw["spec"] = spec("spec")
        kw["atomic"] = bool(raw.get("atomic", True))
        if kind == EVENT:
            kw["event_type"] = raw.get("eventType", MSG)
    if kind == PROCESS:
        start = raw.get("start", {}) or {}
        end = raw.get("end", {}) or {}
        kw["start_type"] = start.get("type", NONE)
        kw["end_type"] = end.get("type", NONE)
        kw["start_spec"] = spec_of(start.get("spec"), schema, updates, name)
        kw["end_spec"] = spec_of(end.get("spec"), schema, updates, name)
    if kind == POSSIBLE:
        end = raw.get("end", {"type": NONE})
        kw["end_type"] = end.get("type", NONE)
        kw["label"] = end.get("label")
    if kind in (POSSIBLE, CHOICE, LOOP):
        kw["phi1"] = cond("phi1")
        kw["phi2"] = cond("phi2")
    if kind in (CHOICE, GATEWAY):
        kw["gtype"] = raw.get("gtype", "exclusive" if kind == CHOICE else "deferredChoice")
    if kind in EXCEPTION_KINDS:
        kw["event_type"] = raw.get("eventType", ERROR if kind != NONINTERRUPTING else MSG)
        kw["label"] = raw.get("label")
    return Block(**kw)


def spec_of(s, schema: DataSchema, updates: dict, where: str):
    if s is None:
        return None
    if isinstance(s, dict):
        return U.parse_update(s, schema)
    if s not in updates:
        raise BlockError(f"block {where} refers to unknown update {s}")
    return updates[s]


def block_names_json(raw: dict) -> list:
    """Block names in a raw JSON tree, used to resolve control variables before parsing."""
    if "block" in raw and "kind" not in raw:
        raw = raw["block"]
    out = [raw.get("name")]
    if raw.get("kind") == "sequence" and "blocks" in raw:
        items = raw["blocks"]
        out += [f"{raw.get('name')}.{i}" for i in range(1, len(items) - 1)]
        for x in items:
            out += block_names_json(x)
        return out
    for r in ("inner", "b1", "b2", "e1", "e2", "a", "handler"):
        if isinstance(raw.get(r), dict):
            out += block_names_json(raw[r])
    return out


def block_to_json(b: Block) -> dict:
    out = {"name": b.name, "kind": _JSON_KIND[b.kind]}
    for r, c in b.children:
        out[r] = block_to_json(c)
    if b.kind in (TASK, EVENT):
        if b.spec is not None:
            out["spec"] = b.spec.name
        if b.kind == TASK and not b.atomic:
            out["atomic"] = False
        if b.kind == EVENT:
            out["eventType"] = b.event_type
    if b.kind == PROCESS:
        out["start"] = {"type": b.start_type}
        if b.start_spec is not None:
            out["start"]["spec"] = b.start_spec.name
        out["end"] = {"type": b.end_type}
        if b.end_spec is not None:
            out["end"]["spec"] = b.end_spec.name
    if b.kind == POSSIBLE:
        out["end"] = {"type": b.end_type}
        if b.label is not None:
            out["end"]["label"] = b.label
    for key in ("phi1", "phi2"):
        g = getattr(b, key)
        if g is not None:
            out[key] = Q.show_body(g)
    if b.gtype is not None:
        out["gtype"] = b.gtype
    if b.kind in EXCEPTION_KINDS:
        out["eventType"] = b.event_type
        if b.label is not None:
            out["label"] = b.label
    return out
