"""Command-line entry point: analyze, check, run, solve and casestudy."""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import List, Optional

from . import lang as L
from .abduction import biab, triab
from .assertions import parse_heap, parse_outcome
from .concrete import AllocatorExhausted, IllFormed, format_weighting, make_allocator, run_program, weighting_json
from .prover import entails, infer_frame
from .symexec import SCHEMA_VERSION, Analyzer, Config, Summary, UnsupportedGuard, normalize_summary
from .validation import STANDARD_FAMILY, Bounds, check_triple

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _seed() -> int:
    try:
        return int(os.environ.get("OSL_SEED", "0"))
    except ValueError:
        return 0


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as f:
        return f.read()


def _emit(args, payload: dict, lines: List[str]) -> None:
    if args.json:
        payload = {"schema": SCHEMA_VERSION, **payload}
        print(json.dumps(payload, indent=2, default=str))
    else:
        for line in lines:
            print(line)


def _family(args) -> List[str]:
    if args.allocator:
        return args.allocator
    seed = _seed()
    return ["min_free", "min_free_offset(3)", f"seeded_random({seed + 1}, 6)", f"seeded_random({seed + 2}, 6)", "lvar_keyed"]


def cmd_analyze(args) -> int:
    prog = L.parse_program(_read(args.file))
    cfg = Config(algebra=args.algebra, mode=args.mode, unroll=args.unroll)
    if args.invariant:
        cfg.invariants = tuple(parse_heap(t) for t in args.invariant)
    a = Analyzer(prog, cfg)
    names = [args.proc] if args.proc else prog.topo_order()
    table = {}
    for n in names:
        sums = a.analyze_proc(n)
        if args.normalize:
            sums = [normalize_summary(s, keep=set(prog.procs[n].params) | _own_vars(prog.procs[n]))
                    for s in sums]
        table[n] = sums
    lines = []
    for n, sums in table.items():
        lines.append(f"{n}: {len(sums)} summaries")
        lines += [f"  {s}" for s in sums]
    _emit(args, {"kind": "summary-table", "algebra": cfg.algebra, "mode": cfg.mode, "unroll": cfg.unroll,
                 "procs": {n: [s.to_json() for s in sums] for n, sums in table.items()}}, lines)
    return EXIT_OK


def _own_vars(p: L.Proc):
    return L.mod(p.body, None) if not any(True for _ in L.called_procs(p.body)) else set()


def cmd_check(args) -> int:
    prog = L.parse_program(_read(args.file))
    data = json.loads(_read(args.summaries))
    procs = data.get("procs", data)
    bounds = Bounds(max_support=args.support, max_models=args.models)
    results = []
    failed = False
    for name, sums in procs.items():
        if name not in prog.procs:
            raise L.ProgramError(f"summary for unknown procedure {name}")
        for entry in sums:
            s = Summary(parse_heap(entry["pre"]), parse_outcome(entry["post_text"]), name,
                        entry.get("mode", "all"), entry.get("algebra", data.get("algebra", "nondet")))
            v = check_triple(prog.procs[name].body, s, args.algebra or s.algebra, _family(args), bounds, prog)
            failed |= not v.ok
            results.append((name, s, v))
    lines = [f"{'PASS' if v.ok else 'FAIL'} [{v.status}, {v.models} models] {n}: {s}"
             + (f"\n    counterexample: {v.counterexample}" if v.counterexample else "")
             for n, s, v in results]
    _emit(args, {"kind": "check", "results": [{"proc": n, "summary": str(s), **v.to_json()}
                                              for n, s, v in results]}, lines)
    return EXIT_FAIL if failed else EXIT_OK


def _parse_store(text: Optional[str]) -> dict:
    out = {}
    if text:
        for part in text.split(","):
            k, v = part.split("=")
            out[k.strip()] = int(v)
    return out


def cmd_run(args) -> int:
    prog = L.parse_program(_read(args.file))
    af = make_allocator(args.allocator[0] if args.allocator else "min_free")
    m = run_program(prog, args.algebra, af, args.fuel, _parse_store(args.store), None, args.proc)
    _emit(args, {"kind": "run", "algebra": args.algebra, "allocator": str(af), "result": weighting_json(m)},
          format_weighting(m) or ["(empty weighting)"])
    return EXIT_OK


def cmd_solve(args) -> int:
    if args.entail:
        P, Q = map(parse_heap, args.entail)
        ans = entails(P, Q)
        frames = [str(f) for f in infer_frame(P, Q)] if ans else []
        _emit(args, {"kind": "entail", "valid": ans, "frames": frames},
              [f"{'valid' if ans else 'not proved'}"] + [f"  frame: {f}" for f in frames])
        return EXIT_OK if ans else EXIT_FAIL
    if args.biab:
        D, Q = map(parse_heap, args.biab)
        sols = biab(D, Q)
        _emit(args, {"kind": "biab", "solutions": [{"anti_frame": str(s.anti_frame), "frame": str(s.frame)}
                                                   for s in sols]}, [str(s) for s in sols] or ["no solution"])
        return EXIT_OK if sols else EXIT_FAIL
    P1, P2 = map(parse_heap, args.triab)
    sols = triab(P1, P2)
    _emit(args, {"kind": "triab", "solutions": [{"anti_frame": str(s.anti_frame), "frame_left": str(s.frame_left),
                                                 "frame_right": str(s.frame_right)} for s in sols]},
          [str(s) for s in sols] or ["no solution"])
    return EXIT_OK if sols else EXIT_FAIL


def cmd_casestudy(args) -> int:
    from .casestudies import CASES
    r = CASES[args.name]()
    _emit(args, {"kind": "casestudy", "name": r.name, "match": r.ok, "seconds": r.seconds, "lines": r.lines},
          r.lines + [f"{'match' if r.ok else 'MISMATCH'} ({r.seconds:.2f}s)"])
    return EXIT_OK if r.ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="osl", description="Analyze, run and validate heap programs against outcome assertions")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="machine-readable output")

    a = sub.add_parser("analyze", help="compute procedure summaries")
    a.add_argument("file")
    a.add_argument("--mode", choices=("all", "single", "invariant"), default="all")
    a.add_argument("--algebra", choices=("det", "nondet", "prob"), default="nondet")
    a.add_argument("--unroll", type=int, default=3)
    a.add_argument("--proc")
    a.add_argument("--invariant", action="append", help="candidate loop invariant (repeatable)")
    a.add_argument("--normalize", action="store_true", help="print summaries in presentation form")
    common(a)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("check", help="validate summaries against the concrete semantics")
    c.add_argument("file")
    c.add_argument("--summaries", required=True)
    c.add_argument("--algebra", choices=("det", "nondet", "prob"))
    c.add_argument("--allocator", action="append", help="allocator in the family (repeatable)")
    c.add_argument("--support", type=int, default=16)
    c.add_argument("--models", type=int, default=400)
    common(c)
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("run", help="run a program with the concrete interpreter")
    r.add_argument("file")
    r.add_argument("--algebra", choices=("det", "nondet", "prob"), default="det")
    r.add_argument("--allocator", action="append")
    r.add_argument("--fuel", type=int, default=8)
    r.add_argument("--proc")
    r.add_argument("--store", help="initial store, e.g. x=1,y=2")
    common(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("solve", help="query the entailment and abduction engines")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--entail", nargs=2, metavar=("P", "Q"))
    g.add_argument("--biab", nargs=2, metavar=("DELTA", "Q"))
    g.add_argument("--triab", nargs=2, metavar=("P1", "P2"))
    common(s)
    s.set_defaults(func=cmd_solve)

    k = sub.add_parser("casestudy", help="run a built-in case study")
    k.add_argument("name", choices=("vector", "consensus"))
    common(k)
    k.set_defaults(func=cmd_casestudy)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_OK
    try:
        return args.func(args)
    except (L.ParseError, L.ProgramError, UnsupportedGuard, IllFormed, AllocatorExhausted,
            ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
