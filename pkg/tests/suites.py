"""Shared model suites for the unit and acceptance tests."""
from __future__ import annotations

from conftest import task, tiny_dab, tiny_json
from dabv.model import dab_from_json, hiring
from dabv.randgen import random_dab

# (label, process body, block under test, expected rule count, error labels, options)
KIND_TABLE = [
    ("Task (atomic)", task("X"), "X", 1, (), ()),
    ("Task (nonatomic)", task("X", "Pick", atomic=False), "X", 2, (), ()),
    ("CatchEvent", {"name": "X", "kind": "event", "eventType": "msg", "spec": "SetA"}, "X", 1, (), ()),
    ("Empty", {"name": "Q", "kind": "sequence", "b1": {"name": "X", "kind": "empty"}, "b2": task("B")},
     "X", 0, (), ()),
    ("Subprocess", {"name": "X", "kind": "subprocess", "inner": task("A")}, "X", 2, (), ()),
    ("Sequence", {"name": "X", "kind": "sequence", "b1": task("A"), "b2": task("B")}, "X", 3, (), ()),
    ("Parallel", {"name": "X", "kind": "gateway", "gtype": "parallel", "b1": task("A"), "b2": task("B")},
     "X", 2, (), ()),
    ("DeferredChoice", {"name": "X", "kind": "gateway", "gtype": "deferredChoice", "b1": task("A"),
                        "b2": task("B")}, "X", 4, (), ()),
    ("Choice", {"name": "X", "kind": "choice", "phi1": "(= $vf a)", "b1": task("A"), "b2": task("B")},
     "X", 4, (), ()),
    ("Inclusive", {"name": "X", "kind": "choice", "gtype": "inclusive", "phi1": "(= $vf a)",
                   "phi2": "(!= $vk undef)", "b1": task("A"), "b2": task("B")}, "X", 6, (), ()),
    ("Loop", {"name": "X", "kind": "loop", "phi1": "(= $vf a)", "b1": task("A"), "b2": task("B")},
     "X", 4, (), ()),
    ("EventDrivenChoice", {"name": "X", "kind": "eventChoice",
                           "e1": {"name": "E1", "kind": "event", "eventType": "msg"},
                           "e2": {"name": "E2", "kind": "event", "eventType": "msg"},
                           "b1": task("A"), "b2": task("B")}, "X", 6, (), ()),
    ("PossibleCompletion (error end)",
     {"name": "H", "kind": "backwardException", "eventType": "error", "label": "L",
      "a": {"name": "S", "kind": "subprocess", "inner": {
          "name": "X", "kind": "possibleCompletion", "inner": task("A"), "phi1": "(= $vf a)",
          "end": {"type": "error", "label": "L"}}},
      "handler": task("B")}, "X", 3, ("L",), ()),
    ("BackwardException", {"name": "X", "kind": "backwardException", "eventType": "msg",
                           "a": {"name": "S", "kind": "subprocess", "inner": task("A")},
                           "handler": task("B")}, "X", 6, (), ()),
    ("ForwardException", {"name": "X", "kind": "forwardException", "eventType": "msg",
                          "a": task("A"), "b1": task("C"), "handler": task("B")}, "X", 8, (), ()),
    ("NonInterruptingException", {"name": "X", "kind": "nonInterruptingException", "eventType": "msg",
                                  "a": task("A"), "b1": {"name": "C", "kind": "empty"}, "handler": task("B")},
     "X", 7, (), ()),
    ("Process", task("A"), "P", 2, (), ()),
    ("n-Sequence (nseq)", {"name": "X", "kind": "sequence", "b1": {"name": "Y", "kind": "sequence",
                                                                   "b1": task("A"), "b2": task("B")},
                           "b2": task("C")}, "X", 4, (), ("nseq",)),
    ("ErrEvent (errevent)",
     {"name": "H", "kind": "forwardException", "eventType": "error", "label": "L",
      "a": {"name": "X", "kind": "eventChoice",
            "e1": {"name": "E1", "kind": "event", "eventType": "msg", "spec": "SetA"},
            "e2": {"name": "E2", "kind": "event", "eventType": "msg"},
            "b1": task("A"),
            "b2": {"name": "Stop", "kind": "possibleCompletion", "phi1": "false", "phi2": "true",
                   "end": {"type": "error", "label": "L"}}},
      "b1": task("C"), "handler": task("B")}, "X", 5, ("L",), ("errevent",)),
]

# pick a key then insert it, versus inserting with no key chosen
PICK_INS = {"name": "Q", "kind": "sequence", "b1": task("A", "Pick"),
            "b2": {"name": "Q2", "kind": "sequence", "b1": task("B", "SetA"), "b2": task("C", "Ins")}}
SET_INS = {"name": "Q", "kind": "sequence", "b1": task("A", "SetA"), "b2": task("C", "Ins")}


def kind_model(body: dict, labels=()):
    return tiny_dab(body, error_labels=labels)


def set_insertion_model():
    """A loop inserting tuples under set semantics: duplicate suppression is not local."""
    body = {"name": "L", "kind": "loop", "phi1": "true",
            "b1": {"name": "S1", "kind": "sequence", "b1": task("A", "Pick"), "b2": task("F", "Flip")},
            "b2": task("B", "Ins")}
    return dab_from_json(tiny_json(body, props=[
        {"name": "two", "formula": "(and (rel S x a) (rel S y b))"}],
        semantics={"insertion": "set"}))


def termination_suite() -> list:
    """(label, dab, repo bound) for the termination acceptance check."""
    out = [("hiring", hiring(), None), ("hiring bound 2", hiring(), 2)]
    for seed in (1, 3, 7, 21, 30, 34, 43, 51, 61):
        out.append((f"random {seed}", random_dab(seed), None))
    out.append(("set insertion", set_insertion_model(), None))
    return out
