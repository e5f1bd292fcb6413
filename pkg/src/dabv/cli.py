"""Command-line front end: check, classify, translate and simulate."""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from . import query as Q
from . import updates as U
from .model import DAB, ModelError, load_dab, load_instance, validate_dab

EXIT_SAFE, EXIT_UNSAFE, EXIT_UNKNOWN, EXIT_INPUT = 0, 10, 20, 2


@dataclass
class RunConfig:
    command: str
    model_path: str
    props: list = field(default_factory=list)
    insertion: Optional[str] = None
    repo_bound: Optional[int] = None
    timeout: float = 60.0
    depth: int = 500
    opts: tuple = ()
    smt: Optional[str] = None
    json: bool = False
    jobs: int = 1
    instance: Optional[str] = None
    seed: int = 0
    steps: Optional[int] = None
    exhaustive: bool = False
    format: str = "internal"


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dabv", description="Verify safety properties of data-aware processes.")
    p.add_argument("command", choices=["check", "classify", "translate", "simulate"])
    p.add_argument("model", help="model JSON file")
    p.add_argument("--prop", action="append", default=[], metavar="NAME", help="property to use (repeatable)")
    p.add_argument("--insertion", choices=[U.MULTISET, U.SET])
    p.add_argument("--repo-bound", type=int, metavar="N")
    p.add_argument("--timeout", type=float, default=60.0, metavar="S")
    p.add_argument("--depth", type=int, default=500, metavar="D")
    p.add_argument("--opt", action="append", default=[], metavar="nseq,errevent")
    p.add_argument("--smt", metavar="CMD", help="external SMT-LIB2 solver command")
    p.add_argument("--json", action="store_true")
    p.add_argument("--jobs", type=int, default=1, metavar="N")
    p.add_argument("--instance", metavar="FILE", help="catalog instance JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, metavar="K")
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--format", choices=["internal", "smt2"], default="internal")
    return p


def config_from_args(a) -> RunConfig:
    opts = tuple(o.strip() for x in a.opt for o in x.split(",") if o.strip())
    return RunConfig(a.command, a.model, list(a.prop), a.insertion, a.repo_bound, a.timeout, a.depth, opts,
                     a.smt, a.json, a.jobs, a.instance, a.seed, a.steps, a.exhaustive, a.format)


class InputError(Exception):
    pass


def _load(cfg: RunConfig) -> DAB:
    try:
        dab = load_dab(cfg.model_path)
    except OSError as e:
        raise InputError(f"cannot read {cfg.model_path}: {e.strerror}") from None
    except ModelError as e:
        raise InputError(str(e)) from None
    rep = validate_dab(dab)
    if not rep.ok:
        raise InputError("invalid model: " + "; ".join(map(str, rep.violations)))
    if cfg.insertion:
        dab = dab.with_semantics(U.Semantics(cfg.insertion, dab.semantics.keys))
    if cfg.repo_bound is not None and cfg.repo_bound < 1:
        raise InputError("--repo-bound must be at least 1")
    if cfg.timeout < 1:
        raise InputError("--timeout must be at least 1")
    bad = set(cfg.opts) - {"nseq", "errevent"}
    if bad:
        raise InputError(f"unknown optimization {', '.join(sorted(bad))}")
    return dab


def _properties(dab: DAB, cfg: RunConfig, need: bool = True) -> list:
    names = cfg.props or list(dab.properties)
    for n in names:
        if n not in dab.properties:
            raise InputError(f"no property named {n}")
    if need and not names:
        raise InputError("the model declares no properties")
    return names


# -- check -------------------------------------------------------------------

def _check_one(cfg: RunConfig, name: str) -> dict:
    from .engine import Config, backward_reach, extract_trace
    from .smt.smtlib import make_solver
    from .translator import translate_dab, translate_property
    dab = _load(cfg)
    ts = translate_dab(dab, cfg.repo_bound, cfg.opts)
    prop = dab.property(name)
    solver = make_solver(ts.sig, cfg.smt)
    try:
        v = backward_reach(ts, translate_property(prop, ts), Config(cfg.timeout, cfg.depth), name, solver)
        v = extract_trace(ts, v, prop)
    finally:
        if solver is not None:
            solver.close()
    return v.to_json()


def _human_verdict(d: dict) -> str:
    st = d["stats"]
    head = (f"{d['property']}: {d['verdict'].upper()}"
            f"  (iterations={st['iterations']}, smt calls={st['smtCalls']}, time={st['wallMs'] / 1000:.2f}s)")
    lines = [head]
    if d.get("reason"):
        lines.append(f"  reason: {d['reason']}")
    if d["verdict"] == "unsafe":
        lines.append(f"  trace ({len(d['trace'])} steps): " + " ; ".join(d["trace"]))
        w = d.get("witness") or {}
        if w:
            lines.append(f"  witness replayed: {'yes' if w.get('replayed') else 'no'}")
    return "\n".join(lines)


def cmd_check(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    dab = _load(cfg)
    names = _properties(dab, cfg)
    if cfg.jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_check_one, [cfg] * len(names), names))
    else:
        results = [_check_one(cfg, n) for n in names]
    if cfg.json:
        print(json.dumps({"formatVersion": 1, "results": results}, indent=2), file=out)
    else:
        for r in results:
            print(_human_verdict(r), file=out)
    return exit_code([r["verdict"] for r in results])


def exit_code(verdicts: list) -> int:
    if any(v == "unknown" for v in verdicts):
        return EXIT_UNKNOWN
    if any(v == "unsafe" for v in verdicts):
        return EXIT_UNSAFE
    return EXIT_SAFE


# -- classify ------------------------------------------------------------------

def cmd_classify(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    from .engine import classify_dab, classify_formula, NON_LOCAL, LOCAL, STRONGLY_LOCAL
    from .translator import translate_dab, translate_property
    dab = _load(cfg)
    rep = classify_dab(dab, None, cfg.repo_bound)
    ts = translate_dab(dab, cfg.repo_bound, cfg.opts)
    rank = {STRONGLY_LOCAL: 0, LOCAL: 1, NON_LOCAL: 2}
    for n in _properties(dab, cfg, need=False):
        g = dab.property(n)
        sep = bool(Q.is_separated(g, dab.schema))
        try:
            cubes = translate_property(g, ts)
            loc = max((classify_formula(c) for c in cubes), key=rank.get, default=STRONGLY_LOCAL)
        except Exception as e:  # a property the translator rejects
            loc = f"untranslatable ({e})"
        rep.properties[n] = (sep, loc)
    if cfg.json:
        print(json.dumps(rep.to_json(), indent=2), file=out)
        return 0
    print(f"catalog: {'acyclic' if rep.acyclic else 'cyclic'}", file=out)
    if rep.cycle:
        print("  cycle: " + " -> ".join(map(str, rep.cycle)), file=out)
    print("updates:", file=out)
    for n, c in rep.clauses.items():
        print(f"  {n}: {c.clause}" + (f" ({c.reason})" if c.reason else ""), file=out)
    if rep.properties:
        print("properties:", file=out)
        for n, (sep, loc) in rep.properties.items():
            print(f"  {n}: {'separated' if sep else 'not separated'}, {loc}", file=out)
    print(f"class: {rep.klass}", file=out)
    return 0


# -- translate -------------------------------------------------------------------

def cmd_translate(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    from .translator import show_system, translate_dab, rule_counts
    dab = _load(cfg)
    ts = translate_dab(dab, cfg.repo_bound, cfg.opts)
    if cfg.format == "smt2":
        from .smt.smtlib import system_script
        out.write(system_script(ts))
        return 0
    if cfg.json:
        from .translator import show_rule
        print(json.dumps({"formatVersion": 1, "variables": [v.name for v in ts.variables],
                          "arrays": sorted(ts.setting.arrays), "rules": [
                              {"name": r.name, "block": r.block, "text": show_rule(r)} for r in ts.rules],
                          "counts": rule_counts(ts)}, indent=2), file=out)
        return 0
    out.write(show_system(ts) + "\n")
    return 0


# -- simulate ---------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    from .interpreter import (ExplorationConfig, Interpreter, InstanceError, REACHABLE, NOT_REACHABLE,
                              explicit_reach, simulate)
    dab = _load(cfg)
    inst = {}
    if cfg.instance:
        try:
            inst = load_instance(cfg.instance)
        except OSError as e:
            raise InputError(f"cannot read {cfg.instance}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise InputError(f"{cfg.instance}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    ecfg = ExplorationConfig(repo_cap=cfg.repo_bound or 3, seed=cfg.seed, options=cfg.opts)
    try:
        Interpreter(dab, inst, ecfg)
    except InstanceError as e:
        raise InputError(f"instance: {e}") from None
    if cfg.exhaustive:
        results = []
        for n in _properties(dab, cfg):
            r = explicit_reach(dab, inst, dab.property(n), ecfg)
            results.append((n, r))
        if cfg.json:
            print(json.dumps({"formatVersion": 1, "results": [dict(r.to_json(), property=n) for n, r in results]},
                             indent=2), file=out)
        else:
            for n, r in results:
                print(f"{n}: {r.status} ({r.states} states)", file=out)
                if r.status == REACHABLE:
                    print("  trace: " + " ; ".join(s.show() for s in r.trace), file=out)
        sts = [r.status for _, r in results]
        if any(s == REACHABLE for s in sts):
            return EXIT_UNSAFE
        return EXIT_SAFE if all(s == NOT_REACHABLE for s in sts) else EXIT_UNKNOWN
    k = cfg.steps if cfg.steps is not None else 20
    trace, final = simulate(dab, inst, k, cfg.seed, ecfg)
    if cfg.json:
        print(json.dumps({"formatVersion": 1, "trace": [s.to_json() for s in trace], "final": final.to_json()},
                         indent=2), file=out)
    else:
        for i, s in enumerate(trace, 1):
            print(f"{i:3d}. {s.show()}", file=out)
        print("snapshot:", file=out)
        print(final.show(), file=out)
    return 0


COMMANDS = {"check": cmd_check, "classify": cmd_classify, "translate": cmd_translate, "simulate": cmd_simulate}


def main(argv=None) -> int:
    a = parser().parse_args(argv)
    cfg = config_from_args(a)
    try:
        return COMMANDS[cfg.command](cfg)
    except InputError as e:
        print(f"dabv: error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
