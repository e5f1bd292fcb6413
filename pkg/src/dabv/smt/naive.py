"""Brute-force satisfiability by enumerating term values.

Used as an independent reference for the built-in solver on small inputs.
Infinite sorts are cut down to the constants that occur plus one fresh
element per term of that sort, which is enough for ground formulas.
"""
from __future__ import annotations

from .. import logic as L
from .solver import Model, eval_model


def _carriers(sig: L.Signature, terms: list) -> dict:
    out: dict = {}
    by_sort: dict = {}
    for t in terms:
        by_sort.setdefault(t.sort, []).append(t)
        if t.arg is not None:
            by_sort.setdefault(t.arg.sort, [])
    for s, ts in by_sort.items():
        info = sig.sorts.get(s)
        if info is not None and info.finite:
            out[s] = list(info.carrier())
            continue
        vals = []
        if info is None or info.has_undef:
            vals.append(None)
        for t in ts:
            if t.kind == L.CONST and t.name is not None and t.name not in vals:
                vals.append(t.name)
        vals += [f"{s}~{k}" for k in range(sum(1 for t in ts if t.kind != L.CONST))]
        out[s] = vals
    return out


def naive_check(f, sig: L.Signature, limit: int = 2_000_000):
    """Return a satisfying Model, or None if there is none."""
    if f == L.TRUE:
        return Model()
    if f == L.FALSE:
        return None
    terms = sorted(L.terms_of(f), key=lambda t: (t.depth, t.key))
    car = _carriers(sig, terms)
    count = [0]

    def go(i: int, m: Model):
        count[0] += 1
        if count[0] > limit:
            raise OverflowError("enumeration limit")
        if i == len(terms):
            return m if eval_model(m, f) else None
        t = terms[i]
        if t.kind == L.CONST:
            return go(i + 1, m)
        if t.arg is None:
            for v in car[t.sort]:
                m.assign[t] = v
                r = go(i + 1, m)
                if r is not None:
                    return r
            del m.assign[t]
            return None
        a = m.value(t.arg)
        if t.kind == L.APP and a is None:
            return go(i + 1, m)
        table = m.tables.setdefault((t.kind, t.name), {})
        if a in table:
            return go(i + 1, m)
        choices = car[t.sort]
        if t.kind == L.APP:
            choices = [v for v in choices if v is not None]
        for v in choices:
            table[a] = v
            r = go(i + 1, m)
            if r is not None:
                return r
        del table[a]
        return None

    return go(0, Model())
