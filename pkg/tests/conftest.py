from __future__ import annotations

import copy
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dabv.model import dab_from_json, hiring, hiring_instance  # noqa: E402
from dabv.translator import translate_dab  # noqa: E402

TINY_SCHEMA = {
    "sorts": [{"name": "K", "kind": "id", "domain": "unbounded"},
              {"name": "Flag", "kind": "value", "domain": {"finite": ["a", "b"]}}],
    "catalog": [{"name": "R", "attrs": [["Rk", "K"], ["Rf", "Flag"]]}],
    "repo": [{"name": "S", "attrs": [["Sk", "K"], ["Sf", "Flag"]]}],
    "caseVars": [["vk", "K"], ["vf", "Flag"]],
}

TINY_UPDATES = [
    {"name": "SetA", "pre": "true", "eff": {"kind": "insertSet", "set": {"vf": "a"}}},
    {"name": "Pick", "pre": {"answer": ["k"], "body": "(rel R k a)"}, "eff": {"kind": "insertSet", "set": {"vk": "k"}}},
    {"name": "Flip", "pre": {"answer": [["q", "Flag"]], "body": "true"}, "eff": {"kind": "insertSet", "set": {"vf": "q"}}},
    {"name": "Ins", "pre": "(!= $vk undef)", "eff": {"kind": "insertSet", "into": "S", "tuple": ["$vk", "$vf"]}},
    {"name": "Del", "pre": {"answer": ["x", "y"], "body": "(rel S x y)"},
     "eff": {"kind": "deleteSet", "from": "S", "tuple": ["x", "y"], "set": {"vk": "x", "vf": "y"}}},
]

TINY_INSTANCE = {"R": [["k1", "a"], ["k2", "b"], ["k3", "a"]]}


def task(name: str, spec: str | None = "SetA", **kw) -> dict:
    out = {"name": name, "kind": "task"}
    if spec:
        out["spec"] = spec
    out.update(kw)
    return out


def tiny_json(inner: dict, props=None, semantics=None, error_labels=()) -> dict:
    raw = {"schema": copy.deepcopy(TINY_SCHEMA), "updates": copy.deepcopy(TINY_UPDATES),
           "errorLabels": list(error_labels),
           "process": {"name": "P", "kind": "process", "inner": inner},
           "properties": props or [{"name": "done", "formula": "(= $Plifecycle completed)"}]}
    if semantics:
        raw["semantics"] = semantics
    return raw


def tiny_dab(inner: dict, **kw):
    return dab_from_json(tiny_json(inner, **kw))


@pytest.fixture(scope="session")
def hiring_dab():
    return hiring()


@pytest.fixture(scope="session")
def hiring_inst():
    return hiring_instance()


@pytest.fixture(scope="session")
def hiring_ts(hiring_dab):
    return translate_dab(hiring_dab)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
