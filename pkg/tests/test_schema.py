from __future__ import annotations

import pytest

from dabv import schema as S


def _schema(**kw):
    raw = {
        "sorts": [{"name": "jid", "kind": "id", "domain": "unbounded"},
                  {"name": "uid", "kind": "id", "domain": "unbounded"},
                  {"name": "Age", "kind": "value", "domain": {"ordinal": [0, 150]}},
                  {"name": "Bool", "kind": "value", "domain": {"finite": ["true", "false"]}}],
        "catalog": [{"name": "Job", "attrs": [["Jid", "jid"]]},
                    {"name": "User", "attrs": [["Uid", "uid"], ["Age", "Age"], ["Job", "jid"]]}],
        "repo": [{"name": "App", "attrs": [["J", "jid"], ["U", "uid"], ["Ok", "Bool"]]}],
        "caseVars": [["cur", "uid"], ["flag", "Bool"]],
    }
    raw.update(kw)
    return S.schema_from_json(raw)


def test_valid_schema_roundtrip():
    s = _schema()
    assert S.validate_schema(s).ok
    assert S.schema_from_json(S.schema_to_json(s)) == s


def test_hiring_schema_is_valid_and_acyclic(hiring_dab):
    s = hiring_dab.schema
    assert S.validate_schema(s).ok
    assert S.is_acyclic(S.characteristic_graph(s.catalog))


def test_functional_view_names_and_sorts():
    fv = S.functional_view(_schema().catalog)
    assert [f.name for f in fv.functions] == ["f_User_Age", "f_User_Job"]
    f = fv.lookup("User", "Job")
    assert (f.source, f.target) == ("uid", "jid")


def test_characteristic_graph_edges():
    g = S.characteristic_graph(_schema().catalog)
    assert g.has_edge(("User", "Uid"), ("User", "Job"))
    assert g.has_edge(("User", "Job"), ("Job", "Jid"))
    assert S.is_acyclic(g)
    assert S.find_cycle(g) is None


def test_cycle_detected():
    cat = [{"name": "A", "attrs": [["Ak", "ka"], ["b", "kb"]]},
           {"name": "B", "attrs": [["Bk", "kb"], ["a", "ka"]]}]
    s = S.schema_from_json({"sorts": [{"name": "ka", "kind": "id"}, {"name": "kb", "kind": "id"}],
                            "catalog": cat})
    g = S.characteristic_graph(s.catalog)
    assert not S.is_acyclic(g)
    assert len(S.find_cycle(g)) == 4


@pytest.mark.parametrize("mutate, clause", [
    (lambda r: r["catalog"][1]["attrs"].insert(0, ["X", "Age"]), "PK-first"),
    (lambda r: r["sorts"].append({"name": "orphan", "kind": "id"}), "id-sort without relation"),
    (lambda r: r["catalog"].append({"name": "Dup", "attrs": [["D", "jid"]]}), "key-sort ambiguity"),
    (lambda r: r["repo"][0]["attrs"].append(["W", "Nope"]), "unknown-sort"),
    (lambda r: r["sorts"].append({"name": "E", "kind": "value", "domain": {"finite": []}}), "empty-domain"),
    (lambda r: r["sorts"].append({"name": "undef", "kind": "value"}), "reserved-name"),
    (lambda r: r["caseVars"].append(["cur", "Bool"]), "duplicate-name"),
    (lambda r: r["sorts"].append({"name": "fid", "kind": "id", "domain": {"finite": ["x"]}}), "id-sort-domain"),
])
def test_schema_violations(mutate, clause):
    raw = S.schema_to_json(_schema())
    mutate(raw)
    rep = S.validate_schema(S.schema_from_json(raw))
    assert not rep.ok
    assert clause in rep.clauses()


def test_domains():
    d = S.Domain(S.ORDINAL, (), 1, 3)
    assert d.elements() == (1, 2, 3)
    assert d.contains(2) and not d.contains(4) and not d.contains(True)
    assert not S.Domain().is_finite
    with pytest.raises(ValueError):
        S.Domain().elements()
