"""SMT-LIB2 printing and a persistent external solver process."""
from __future__ import annotations

import os
import re
import shlex
import subprocess
from typing import Optional

from .. import logic as L
from .solver import Model, SatResult, SAT, UNSAT, UNKNOWN

ENV_VAR = "DABV_SMT_CMD"


def sym(s: str) -> str:
    s = str(s).replace("|", "¦").replace("\\", "/")
    return f"|{s}|"


class Encoder:
    """Declarations and term printing for one signature."""

    def __init__(self, sig: L.Signature):
        self.sig = sig

    def sort_kind(self, name: str) -> str:
        info = self.sig.sorts.get(name)
        if info is None or not info.finite:
            return "uninterpreted"
        return "ordinal" if info.ordinal else "enum"

    def smt_sort(self, name: str) -> str:
        return "Int" if self.sort_kind(name) == "ordinal" else sym("s:" + name)

    def undef_term(self, sort: str) -> str:
        k = self.sort_kind(sort)
        if k == "ordinal":
            lo = min(self.sig.sorts[sort].values)
            return str(lo - 1) if lo - 1 >= 0 else f"(- {1 - lo})"
        if k == "enum":
            return sym(f"{sort}::undef")
        return sym(f"{sort}::undef")

    def const_term(self, t: L.Term) -> str:
        if t.name is None:
            return self.undef_term(t.sort)
        k = self.sort_kind(t.sort)
        if k == "ordinal":
            return str(t.name) if t.name >= 0 else f"(- {-t.name})"
        if k == "enum":
            return sym(f"{t.sort}::{t.name}")
        return sym(f"{t.sort}::={t.name}")

    def term(self, t: L.Term) -> str:
        if t.kind == L.CONST:
            return self.const_term(t)
        if t.arg is None:
            return sym(f"{t.kind}:{t.name}")
        return f"({sym(f'{t.kind}:{t.name}')} {self.term(t.arg)})"

    def lit(self, l) -> str:
        op, a, b = l
        x, y = self.term(a), self.term(b)
        if op == L.EQ:
            return f"(= {x} {y})"
        if op == L.NE:
            return f"(not (= {x} {y}))"
        u = self.undef_term(a.sort)
        proper = f"(and (not (= {x} {u})) (not (= {y} {u})))"
        core = {L.LT: "<", L.LE: "<=", L.NLT: "<", L.NLE: "<="}[op]
        pos = f"(and {proper} ({core} {x} {y}))"
        return pos if op in (L.LT, L.LE) else f"(not {pos})"

    def formula(self, f) -> str:
        if f == L.TRUE:
            return "true"
        if f == L.FALSE:
            return "false"
        if len(f) == 3:
            return self.lit(f)
        if f[0] == "not":
            return f"(not {self.formula(f[1])})"
        op = "and" if f[0] == "and" else "or"
        return f"({op} " + " ".join(self.formula(p) for p in f[1]) + ")"

    def declarations(self, terms) -> list:
        """Sort, constant and function declarations plus axioms for a term set."""
        out = []
        sorts = {t.sort for t in terms}
        for t in terms:
            if t.kind in (L.APP, L.READ):
                sorts.add(t.arg.sort)
        for s in sorted(sorts):
            k = self.sort_kind(s)
            info = self.sig.sorts.get(s)
            if k == "enum":
                vals = [sym(f"{s}::{v}") for v in info.values]
                if info.has_undef:
                    vals.append(sym(f"{s}::undef"))
                out.append(f"(declare-datatypes (({self.smt_sort(s)} 0)) (((" + ") (".join(vals) + "))))")
            elif k == "uninterpreted":
                out.append(f"(declare-sort {self.smt_sort(s)} 0)")
                if info is None or info.has_undef:
                    out.append(f"(declare-const {sym(f'{s}::undef')} {self.smt_sort(s)})")
        consts: dict = {}
        decl = set()
        for t in sorted(terms, key=lambda t: t.key):
            if t.kind == L.CONST:
                if t.name is not None and self.sort_kind(t.sort) == "uninterpreted":
                    n = sym(f"{t.sort}::={t.name}")
                    if n not in decl:
                        decl.add(n)
                        out.append(f"(declare-const {n} {self.smt_sort(t.sort)})")
                        consts.setdefault(t.sort, []).append(n)
                continue
            n = sym(f"{t.kind}:{t.name}")
            if n in decl:
                continue
            decl.add(n)
            if t.arg is None:
                out.append(f"(declare-const {n} {self.smt_sort(t.sort)})")
            else:
                out.append(f"(declare-fun {n} ({self.smt_sort(t.arg.sort)}) {self.smt_sort(t.sort)})")
        for s, ns in consts.items():
            info = self.sig.sorts.get(s)
            ds = ns + ([sym(f"{s}::undef")] if info is None or info.has_undef else [])
            if len(ds) > 1:
                out.append("(assert (distinct " + " ".join(ds) + "))")
        for t in sorted(terms, key=lambda t: t.key):
            if t.kind != L.CONST and t.arg is None and self.sort_kind(t.sort) == "ordinal":
                vals = self.sig.sorts[t.sort].values
                lo, hi = min(vals), max(vals)
                out.append(f"(assert (and (<= {self.undef_term(t.sort)} {self.term(t)}) (<= {self.term(t)} {hi})))")
        for t in sorted(terms, key=lambda t: t.key):
            if t.kind == L.APP:
                ua, ut = self.undef_term(t.arg.sort), self.undef_term(t.sort)
                out.append(f"(assert (= (= {self.term(t.arg)} {ua}) (= {self.term(t)} {ut})))")
            if t.kind in (L.APP, L.READ) and self.sort_kind(t.sort) == "ordinal":
                hi = max(self.sig.sorts[t.sort].values)
                out.append(f"(assert (and (<= {self.undef_term(t.sort)} {self.term(t)}) (<= {self.term(t)} {hi})))")
        return out


def script(f, sig: L.Signature, check: bool = True) -> str:
    """A standalone SMT-LIB2 script asserting f."""
    enc = Encoder(sig)
    terms = L.terms_of(f)
    lines = ["(set-logic ALL)"] + enc.declarations(terms) + [f"(assert {enc.formula(f)})"]
    if check:
        lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def parse_sexprs(text: str) -> list:
    toks = re.findall(r"\|[^|]*\||\(|\)|[^\s()|]+", text)
    stack: list = [[]]
    for t in toks:
        if t == "(":
            stack.append([])
        elif t == ")":
            x = stack.pop()
            stack[-1].append(x)
        else:
            stack[-1].append(t)
    return stack[0]


def solver_command(override: Optional[str] = None) -> Optional[list]:
    cmd = override or os.environ.get(ENV_VAR)
    if not cmd:
        return None
    return shlex.split(cmd)


class ExternalSolver:
    """One solver subprocess queried incrementally with push/pop."""

    def __init__(self, sig: L.Signature, cmd, timeout: float = 30.0):
        self.sig = sig
        self.enc = Encoder(sig)
        self.cmd = cmd if isinstance(cmd, list) else shlex.split(cmd)
        self.timeout = timeout
        self.calls = 0
        self.proc = None
        self._start()

    def _start(self) -> None:
        self.proc = subprocess.Popen(self.cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                     stderr=subprocess.STDOUT, text=True, bufsize=1)
        self._send("(set-option :print-success false)")
        self._send("(set-option :produce-models true)")
        self._send("(set-logic ALL)")

    def _send(self, text: str) -> None:
        self.proc.stdin.write(text + "\n")
        self.proc.stdin.flush()

    def _read_sexpr(self) -> str:
        buf, depth = [], 0
        while True:
            line = self.proc.stdout.readline()
            if not line:
                raise EOFError("solver exited")
            buf.append(line)
            depth += line.count("(") - line.count(")")
            if depth <= 0 and "".join(buf).strip():
                return "".join(buf).strip()

    def close(self) -> None:
        if self.proc is not None:
            try:
                self._send("(exit)")
                self.proc.wait(timeout=2)
            except Exception:
                self.proc.kill()
            self.proc = None

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def check(self, f, want_model: bool = True) -> SatResult:
        self.calls += 1
        if f == L.TRUE:
            return SatResult(SAT, Model() if want_model else None)
        if f == L.FALSE:
            return SatResult(UNSAT)
        terms = sorted(L.terms_of(f), key=lambda t: t.depth)
        try:
            self._send("(push 1)")
            for d in self.enc.declarations(terms):
                self._send(d)
            self._send(f"(assert {self.enc.formula(f)})")
            self._send("(check-sat)")
            ans = self._read_sexpr()
            if ans == "unsat":
                res = SatResult(UNSAT)
            elif ans == "sat":
                res = SatResult(SAT, self._model(terms) if want_model else None)
            else:
                # errors leave unread output behind, so start afresh
                self.close()
                self._start()
                return SatResult(UNKNOWN, reason=f"solver said {ans}")
            self._send("(pop 1)")
            return res
        except (EOFError, BrokenPipeError, OSError) as e:
            self.close()
            self._start()
            return SatResult(UNKNOWN, reason=f"protocol error: {e}")

    def _model(self, terms: list) -> Model:
        live = [t for t in terms if t.kind != L.CONST]
        undefs = sorted({t.sort for t in terms if self.enc.sort_kind(t.sort) == "uninterpreted"})
        if not live:
            return Model()
        asks = [self.enc.term(t) for t in live] + [sym(f"{s}::undef") for s in undefs
                                                    if self.sig.sorts.get(s) is None or self.sig.sorts[s].has_undef]
        consts = sorted({t for t in terms if t.kind == L.CONST and t.name is not None
                         and self.enc.sort_kind(t.sort) == "uninterpreted"}, key=lambda t: t.key)
        asks += [self.enc.const_term(c) for c in consts]
        self._send("(get-value (" + " ".join(asks) + "))")
        pairs = parse_sexprs(self._read_sexpr())[0]
        raw = [_flat(v) for _, v in pairs]
        named = {}
        k = len(live)
        for s in undefs:
            if self.sig.sorts.get(s) is None or self.sig.sorts[s].has_undef:
                named[(s, raw[k])] = None
                k += 1
        for c in consts:
            named[(c.sort, raw[k])] = c.name
            k += 1
        m = Model()
        vals = {}
        for t, v in zip(live, raw):
            vals[t] = self._decode(t.sort, v, named)
        for t in live:
            v = vals[t]
            m.carriers.setdefault(t.sort, set()).add(v)
            if t.arg is None:
                m.assign[t] = v
            else:
                a = vals[t.arg] if t.arg.kind != L.CONST else t.arg.name
                m.tables.setdefault((t.kind, t.name), {})[a] = v
        return m

    def _decode(self, sort: str, v: str, named: dict):
        k = self.enc.sort_kind(sort)
        if k == "ordinal":
            n = int(v.replace("(", "").replace(")", "").replace("- ", "-").replace(" ", ""))
            return None if n < min(self.sig.sorts[sort].values) else n
        if k == "enum":
            name = v.strip("|").split("::", 1)[1]
            if name == "undef":
                return None
            info = self.sig.sorts[sort]
            for x in info.values:
                if str(x) == name:
                    return x
            return name
        if (sort, v) in named:
            return named[(sort, v)]
        return f"{sort}!{v.strip('|').split('!')[-1]}"


def _flat(v) -> str:
    if isinstance(v, list):
        return "(" + " ".join(_flat(x) for x in v) + ")"
    return v


def make_solver(sig: L.Signature, override: Optional[str] = None):
    """The external solver when one is configured, else None."""
    cmd = solver_command(override)
    if cmd is None:
        return None
    return ExternalSolver(sig, cmd)


def system_script(ts) -> str:
    """The transition system as SMT-LIB2 definitions (one Bool per rule).

    Primed symbols carry a trailing quote; array updates are stated with a
    universally quantified cell variable.
    """
    enc = Encoder(ts.sig)
    terms = set()
    prime = {}
    for v in ts.variables:
        terms.add(v)
        prime[v] = L.var(v.name + "'", v.sort)
    formulas = []
    j_vars = set()
    for r in ts.rules:
        formulas.append(r.guard)
        for _, t in r.assign:
            terms |= set(L.subterms(t))
        for u in r.updates:
            j_vars.add(u.j)
            for c in u.cases:
                formulas.append(c.cond)
                for _, t in c.values:
                    terms |= set(L.subterms(t))
                if c.index is not None:
                    terms.add(c.index)
    for f in formulas:
        terms |= L.terms_of(f)
    terms |= set(prime.values())
    arrays = ts.setting.arrays
    for a, (_rel, _attr, idx, srt) in arrays.items():
        for name in (a, a + "'"):
            terms.add(L.read(name, L.ivar("j", idx), srt))
    decl_terms = {t for t in terms if t not in j_vars}
    lines = ["(set-logic ALL)", "; sorts, state variables, arrays and catalog functions"]
    lines += [d for d in enc.declarations(decl_terms) if not (d.startswith("(assert") and "|i:j|" in d)]
    init = ts.initial_formula()
    cells = []
    for a, (_rel, _attr, idx, srt) in arrays.items():
        j = "|i:j|"
        cells.append(f"(forall (({j} {enc.smt_sort(idx)})) (= ({sym('r:' + a)} {j}) {enc.undef_term(srt)}))")
    lines.append(f"(define-fun |init| () Bool (and {enc.formula(init)} {' '.join(cells) or 'true'}))")
    for r in ts.rules:
        parts = [enc.formula(r.guard)]
        assigned = dict(r.assign)
        for v in ts.variables:
            rhs = assigned.get(v, v)
            parts.append(f"(= {enc.term(prime[v])} {enc.term(rhs)})")
        touched = {}
        for u in r.updates:
            for a, (rel, _attr, idx, srt) in arrays.items():
                if rel == u.relation:
                    touched[a] = (u, idx, srt)
        for a, (_rel, _attr, idx, srt) in arrays.items():
            j = L.ivar("j", idx)
            cur = enc.term(L.read(a, j, srt))
            if a not in touched:
                body = cur
            else:
                u = touched[a][0]
                body = cur
                for c in reversed(u.at(j)):
                    v = c.value(a)
                    if v is None:
                        continue
                    cond = L.conj(([L.eq(j, c.index)] if c.index is not None else []) + [c.cond])
                    body = f"(ite {enc.formula(cond)} {enc.term(v)} {body})"
            parts.append(f"(forall ((|i:j| {enc.smt_sort(idx)})) (= ({sym('r:' + a + chr(39))} |i:j|) {body}))")
        lines.append(f"; {r.name}")
        lines.append(f"(define-fun {sym('rule:' + r.name)} () Bool (and {' '.join(parts)}))")
    return "\n".join(lines) + "\n"
