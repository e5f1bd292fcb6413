"""Random small DABs, catalog instances and formulas for differential testing.

Generated models only use finite value sorts besides catalog keys, so the
explicit-state oracle explores the same values the symbolic engine reasons
about.  The catalog instance is saturated: every attribute combination
occurs on two distinct keys.
"""
from __future__ import annotations

import itertools
import random
from typing import Optional

from .model import DAB, dab_from_json

FLAG_VALUES = ["a", "b"]


def _schema(rng: random.Random, with_repo: bool, two_level: bool) -> dict:
    sorts = [{"name": "K", "kind": "id", "domain": "unbounded"},
             {"name": "Flag", "kind": "value", "domain": {"finite": FLAG_VALUES}},
             {"name": "Lvl", "kind": "value", "domain": {"ordinal": [0, 2]}}]
    catalog = [{"name": "R", "attrs": [["Rk", "K"], ["Rf", "Flag"]]}]
    if two_level:
        sorts.append({"name": "M", "kind": "id", "domain": "unbounded"})
        catalog.append({"name": "P", "attrs": [["Pm", "M"], ["Pk", "K"]]})
    repo = [{"name": "S", "attrs": [["Sk", "K"], ["Sf", "Flag"]]}] if with_repo else []
    case = [["vk", "K"], ["vf", "Flag"], ["vl", "Lvl"]]
    if two_level:
        case.append(["vm", "M"])
    return {"sorts": sorts, "catalog": catalog, "repo": repo, "caseVars": case}


def _updates(rng: random.Random, with_repo: bool, two_level: bool) -> list:
    f = rng.choice(FLAG_VALUES)
    ups = [
        {"name": "PickK", "pre": {"answer": ["k"], "body": f"(rel R k {f})" if rng.random() < 0.5 else "(rel R k g)"},
         "eff": {"kind": "insertSet", "set": {"vk": "k"}}},
        {"name": "ReadF", "pre": {"answer": ["g"], "body": "(rel R $vk g)"},
         "eff": {"kind": "insertSet", "set": {"vf": "g"}}},
        {"name": "SetL", "pre": {"answer": [["n", "Lvl"]], "body": rng.choice(["true", "(< n 2)", "(> n $vl)"])},
         "eff": {"kind": "insertSet", "set": {"vl": "n"}}},
        {"name": "Flip", "pre": {"answer": [["q", "Flag"]], "body": rng.choice(["true", "(!= q $vf)"])},
         "eff": {"kind": "insertSet", "set": {"vf": "q"}}},
    ]
    if two_level:
        ups.append({"name": "PickM", "pre": {"answer": ["m", "k"], "body": "(rel P m k)"},
                    "eff": {"kind": "insertSet", "set": {"vm": "m", "vk": "k"}}})
    if with_repo:
        ups.append({"name": "Ins", "pre": rng.choice(["true", "(= $vf a)", "(!= $vk undef)"]),
                    "eff": {"kind": "insertSet", "into": "S", "tuple": ["$vk", "$vf"]}})
        ups.append({"name": "Del", "pre": {"answer": ["x", "y"], "body": "(rel S x y)"},
                    "eff": {"kind": "deleteSet", "from": "S", "tuple": ["x", "y"],
                            "set": {"vk": "x", "vf": "y", "vl": rng.choice(["0", "1"])}}})
        ups.append({"name": "Mark", "pre": "true",
                    "eff": {"kind": "condUpdate", "rel": "S", "rowVars": ["x", "y"],
                            "tree": {"if": "(= y a)", "then": ["x", "b"], "else": ["x", "y"]}}})
    return ups


def _cond(rng: random.Random) -> str:
    return rng.choice(["(= $vf a)", "(= $vf b)", "(< $vl 1)", "(= $vl 2)", "(= $vk undef)", "true"])


class _Blocks:
    def __init__(self, rng: random.Random, specs: list):
        self.rng = rng
        self.specs = specs
        self.n = 0

    def name(self, base: str) -> str:
        self.n += 1
        return f"{base}{self.n}"

    def task(self) -> dict:
        return {"name": self.name("T"), "kind": "task", "spec": self.rng.choice(self.specs)}

    def block(self, budget: int) -> tuple:
        """A random block using at most `budget` blocks; returns (json, used)."""
        rng = self.rng
        if budget < 3 or rng.random() < 0.25:
            return self.task(), 1
        kind = rng.choice(["sequence", "sequence", "gateway", "choice", "loop", "possible", "eventChoice"])
        if kind == "possible":
            inner, u = self.block(budget - 1)
            return ({"name": self.name("C"), "kind": "possibleCompletion", "inner": inner,
                     "phi1": _cond(rng)}, u + 1)
        if kind == "eventChoice" and budget >= 5:
            e1 = {"name": self.name("E"), "kind": "event", "eventType": "msg", "spec": rng.choice(self.specs)}
            e2 = {"name": self.name("E"), "kind": "event", "eventType": "msg"}
            return ({"name": self.name("X"), "kind": "eventChoice", "e1": e1, "e2": e2,
                     "b1": self.task(), "b2": self.task()}, 5)
        left = (budget - 1) // 2
        b1, u1 = self.block(max(1, left))
        b2, u2 = self.block(max(1, budget - 1 - u1))
        out = {"name": self.name(kind[0].upper()), "kind": kind if kind != "eventChoice" else "sequence",
               "b1": b1, "b2": b2}
        if kind == "gateway":
            out["gtype"] = rng.choice(["parallel", "deferredChoice"])
        if kind == "choice":
            out["phi1"] = _cond(rng)
            if rng.random() < 0.3:
                out["gtype"] = "inclusive"
                out["phi2"] = _cond(rng)
        if kind == "loop":
            out["phi1"] = _cond(rng)
        return out, u1 + u2 + 1


def _names(raw: dict) -> list:
    out = [raw["name"]]
    for k in ("inner", "b1", "b2", "e1", "e2", "a", "handler"):
        if k in raw:
            out += _names(raw[k])
    return out


def random_dab_json(seed: int, max_blocks: int = 8, with_repo: Optional[bool] = None,
                    two_level: Optional[bool] = None, insertion: str = "multiset") -> dict:
    rng = random.Random(seed)
    with_repo = rng.random() < 0.6 if with_repo is None else with_repo
    two_level = rng.random() < 0.3 if two_level is None else two_level
    schema = _schema(rng, with_repo, two_level)
    updates = _updates(rng, with_repo, two_level)
    bl = _Blocks(rng, [u["name"] for u in updates])
    inner, _ = bl.block(max_blocks - 1)
    process = {"name": "Root", "kind": "process", "inner": inner}
    names = _names(process)
    props = []
    for k in range(3):
        b = rng.choice(names)
        parts = [f"(= ${b}lifecycle {rng.choice(['completed', 'completed', 'enabled'])})"]
        r = rng.random()
        if r < 0.3:
            parts.append(f"(= $vf {rng.choice(FLAG_VALUES)})")
        elif r < 0.5:
            parts.append(f"(= $vl {rng.randint(0, 2)})")
        elif r < 0.7 and with_repo:
            parts.append(f"(rel S x {rng.choice(FLAG_VALUES)})")
        elif r < 0.8:
            parts.append("(rel R $vk b)")
        body = parts[0] if len(parts) == 1 else "(and " + " ".join(parts) + ")"
        props.append({"name": f"p{k}", "formula": body})
    out = {"schema": schema, "updates": updates, "process": process, "properties": props}
    if insertion != "multiset":
        out["semantics"] = {"insertion": insertion}
    return out


def random_dab(seed: int, **kw) -> DAB:
    return dab_from_json(random_dab_json(seed, **kw))


def saturated_instance(dab: DAB, copies: int = 2) -> dict:
    """Every attribute combination on `copies` keys, foreign keys onto every row."""
    schema = dab.schema
    inst: dict = {}
    keys: dict = {}
    pending = list(schema.catalog)
    while pending:
        for r in list(pending):
            deps = [s for _, s in r.attributes[1:] if schema.keyed_by(s) is not None]
            if any(schema.keyed_by(s).name not in inst for s in deps):
                continue
            pools = []
            for _, s in r.attributes[1:]:
                if schema.keyed_by(s) is not None:
                    pools.append(keys[s])
                else:
                    pools.append(list(schema.sort(s).domain.elements()))
            combos = [[]]
            for p in pools:
                combos = [c + [v] for c in combos for v in p]
            n = copies if not deps else 1
            rows = []
            for c in combos:
                for _ in range(n):
                    rows.append([f"{r.key_sort.lower()}{len(rows) + 1}"] + c)
            inst[r.name] = rows
            keys[r.key_sort] = [row[0] for row in rows]
            pending.remove(r)
    return inst


# -- formulas ------------------------------------------------------------------

def _var_lits(rng: random.Random, ts, v) -> list:
    info = ts.sig.sort(v.sort)
    from . import logic as L
    if info.finite:
        vals = list(info.carrier())
        c = rng.choice(vals)
        atom = L.eq(v, L.const(c, v.sort) if c is not None else L.undef(v.sort))
        out = [atom, L.negate_lit(atom) if L.is_lit(atom) else atom]
        if info.ordinal:
            out.append(L.lit(rng.choice([L.LT, L.LE]), v, L.const(rng.choice(info.values), v.sort)))
        return out
    return [L.eq(v, L.undef(v.sort)), L.ne(v, L.undef(v.sort))]


def random_state_cube(rng: random.Random, ts, max_lits: int = 4, max_index: int = 2,
                      strongly_local: bool = False):
    """A random satisfiable-looking state formula over the variables and arrays of `ts`.

    With `strongly_local`, index literals never mention artifact variables and
    distinct index variables are only related by disequalities.
    """
    from . import logic as L
    from .translator import StateFormula
    cands = []
    for v in ts.variables:
        cands.extend(_var_lits(rng, ts, v))
    for fn, (src, tgt) in ts.sig.functions.items():
        for v in ts.variables:
            if v.sort == src:
                t = L.app(fn, v, tgt)
                info = ts.sig.sort(tgt)
                if info.finite:
                    cands.append(L.eq(t, L.const(rng.choice(info.values), tgt)))
                cands.append(L.ne(t, L.undef(tgt)))
    idx = []
    rels = sorted(ts.setting.index_sorts.items())
    if rels:
        for k in range(rng.randint(0, max_index)):
            rel, srt = rng.choice(rels)
            e = L.ivar(f"x{k}", srt)
            idx.append(e)
            for a in ts.setting.relation_arrays(rel):
                tgt = ts.setting.arrays[a][3]
                rd = L.read(a, e, tgt)
                info = ts.sig.sort(tgt)
                if info.finite:
                    c = rng.choice(info.values)
                    cands.append(L.eq(rd, L.const(c, tgt)))
                    if info.ordinal:
                        cands.append(L.lit(rng.choice([L.LT, L.LE]), L.const(c, tgt), rd))
                cands.append(L.ne(rd, L.undef(tgt)))
                if not strongly_local:
                    for v in ts.variables:
                        if v.sort == tgt:
                            cands.append(L.eq(rd, v))
        for a, b in itertools.combinations(idx, 2):
            if a.sort == b.sort:
                cands.append(L.ne(a, b))
    cands = [c for c in cands if L.is_lit(c)]
    lits = set(rng.sample(cands, min(len(cands), rng.randint(1, max_lits))))
    # every index variable needs a literal of its own, else it is vacuous
    for e in idx:
        if not any(L.contains(l[1], e) or L.contains(l[2], e) for l in lits):
            mine = [c for c in cands if (L.contains(c[1], e) or L.contains(c[2], e)) and c[0] != L.NE
                    or (c[0] == L.NE and c[1].kind == L.READ and c[1].arg is e)]
            if mine:
                lits.add(rng.choice(mine))
    used = [e for e in idx if any(L.contains(l[1], e) or L.contains(l[2], e) for l in lits)]
    return StateFormula(tuple(used), frozenset(lits))


def qe_signature(values: tuple = ("a", "b")):
    """A two-level acyclic catalog signature: R2(K2, p -> K1, w: V), R1(K1, v: V)."""
    from . import logic as L
    sig = L.Signature()
    sig.add_sort(L.SortInfo("V", tuple(values)))
    sig.add_sort(L.SortInfo("K1"))
    sig.add_sort(L.SortInfo("K2"))
    sig.functions["f_R1_v"] = ("K1", "V")
    sig.functions["f_R2_p"] = ("K2", "K1")
    sig.functions["f_R2_w"] = ("K2", "V")
    return sig


def _qe_terms(rng: random.Random, sig, base) -> list:
    from . import logic as L
    out = [base]
    if base.sort == "K2":
        p = L.app("f_R2_p", base, "K1")
        out += [p, L.app("f_R2_w", base, "V"), L.app("f_R1_v", p, "V")]
    elif base.sort == "K1":
        out.append(L.app("f_R1_v", base, "V"))
    return out


def random_eliminable(rng: random.Random, sig=None, n_free: int = 2, n_elim: int = 2, max_lits: int = 4):
    """A random cube over free variables x* and data variables y* to eliminate."""
    from . import logic as L
    sig = sig or qe_signature()
    sorts = ["K2", "K1", "V"]
    xs = [L.var(f"x{k}", rng.choice(sorts)) for k in range(n_free)]
    ys = [L.dvar(f"y{k}", rng.choice(sorts)) for k in range(n_elim)]
    terms = []
    for v in xs + ys:
        terms += _qe_terms(rng, sig, v)
    by_sort: dict = {}
    for t in terms:
        by_sort.setdefault(t.sort, []).append(t)
    lits = set()
    for _ in range(rng.randint(1, max_lits)):
        y = rng.choice(ys)
        a = rng.choice(_qe_terms(rng, sig, y))
        pool = [t for t in by_sort[a.sort] if t is not a]
        if a.sort == "V":
            pool += [L.const(c, "V") for c in sig.sort("V").values]
        pool.append(L.undef(a.sort))
        b = rng.choice(pool)
        l = L.lit(rng.choice([L.EQ, L.NE]), a, b)
        if L.is_lit(l):
            lits.add(l)
    return frozenset(lits), tuple(ys), tuple(xs)


def qe_instance(sig=None, copies: int = 2) -> dict:
    """A saturated finite model of the two-level signature: function tables per symbol."""
    sig = sig or qe_signature()
    vals = list(sig.sort("V").values)
    k1 = {}
    for v in vals:
        for c in range(copies):
            k1[f"k1{v}{c}"] = v
    k2p, k2w = {}, {}
    for k in k1:
        for v in vals:
            n = f"k2{k[2:]}{v}"
            k2p[n], k2w[n] = k, v
    return {"carriers": {"V": vals + [None], "K1": list(k1) + [None], "K2": list(k2p) + [None]},
            "f_R1_v": k1, "f_R2_p": k2p, "f_R2_w": k2w}
