"""Built-in case-study programs with their expected summaries."""
from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional

from . import lang as L
from .assertions import Basic, OPlus, Top, Weighted, basics, parse_heap, parse_outcome
from .symexec import Analyzer, Config, Summary, alpha_equivalent, normalize_summary

VECTOR_SRC = """\
proc push_back(v) {
  { y <- [v]; free(y); y := alloc(); [v] <- y } + skip
}

proc main(v) {
  x <- [v]
  push_back(v)
  [x] <- 1
}
"""

CONSENSUS_SRC = """\
proc broadcast(v, p) {
  [p] <- v +[0.99] error()
}

proc decide(p1, p2, p3, v) {
  x1 <- [p1]; x2 <- [p2]; x3 <- [p3]
  if x1 = x2 { [v] <- x1 }
  else if x1 = x3 { [v] <- x1 }
  else if x2 = x3 { [v] <- x2 }
  else { skip }
}

proc main() {
  p1 := alloc(); broadcast(v1, p1)
  p2 := alloc(); broadcast(v2, p2)
  p3 := alloc(); broadcast(v3, p3)
  v := alloc()
  decide(p1, p2, p3, v)
}
"""

PUSH_BACK_TABLE = [
    ("v |-> A * A |-> _", "(ok: exists B. v |-> B * B |-> _ * A !|->) (+) (ok: v |-> A * A |-> _)"),
    ("v |-> A * A !|->", "(er: v |-> A * A !|->) (+) (ok: v |-> A * A !|->)"),
    ("v !|->", "(er: v !|->) (+) (ok: v !|->)"),
]
VECTOR_BUG = ("v |-> x * x |-> _", "(er: exists B. v |-> B * B |-> _ * x !|->) (+) top")
CONSENSUS_WEIGHT = Fraction(99, 100) ** 3


@dataclass
class CaseResult:
    name: str
    ok: bool
    seconds: float
    lines: List[str]
    summary: Optional[Summary] = None


def vector_program() -> L.Program:
    return L.parse_program(VECTOR_SRC)


def consensus_program() -> L.Program:
    return L.parse_program(CONSENSUS_SRC)


def expected(pre: str, post: str, keep) -> Summary:
    return normalize_summary(Summary(parse_heap(pre), parse_outcome(post)), keep=keep)


def push_back_table() -> List[Summary]:
    a = Analyzer(vector_program(), Config(mode="all"))
    return [normalize_summary(s, keep={"v"}) for s in a.analyze_proc("push_back")]


def run_vector() -> CaseResult:
    start = time.perf_counter()
    prog = vector_program()
    table = push_back_table()
    lines = []
    ok = True
    for pre, post in PUSH_BACK_TABLE:
        want = expected(pre, post, {"v"})
        hit = any(alpha_equivalent(g, want) for g in table)
        ok &= hit
        lines.append(f"push_back {'found' if hit else 'MISSING'}: {want}")
    single = Analyzer(prog, Config(mode="single"))
    mains = [normalize_summary(s, keep={"v", "x"}, specialize=True) for s in single.analyze_proc("main")]
    want = expected(*VECTOR_BUG, {"v", "x"})
    found = next((g for g in mains if alpha_equivalent(g, want)), None)
    ok &= found is not None
    lines.append(f"main error summary {'found' if found else 'MISSING'}: {found or want}")
    return CaseResult("vector", ok, time.perf_counter() - start, lines, found)


def ok_weight(phi) -> Optional[Fraction]:
    """Weight w of an assertion shaped (ok: P)_w ⊕ ⊤."""
    if isinstance(phi, OPlus) and isinstance(phi.right, Top):
        body = phi.left
        w = Fraction(1)
        while isinstance(body, Weighted):
            w *= Fraction(body.weight)
            body = body.body
        if isinstance(body, Basic) and body.tag == "ok":
            return w
    return None


def consensus_summary() -> Optional[Summary]:
    """The main summary whose pre assumes v1 = v2 and whose ok outcome stores into v."""
    from .assertions import Eq, PointsTo
    a = Analyzer(consensus_program(), Config(mode="single", algebra="prob"))
    for s in a.analyze_proc("main"):
        w = ok_weight(s.post)
        if w is None:
            continue
        if Eq(L.Var("v1"), L.Var("v2")) not in s.pre.pure:
            continue
        leaf = next(basics(s.post))
        if any(isinstance(x, PointsTo) and x.addr == L.Var("v") for x in leaf.heap.spatial):
            return s
    return None


def run_consensus() -> CaseResult:
    start = time.perf_counter()
    s = consensus_summary()
    w = ok_weight(s.post) if s else None
    ok = w == CONSENSUS_WEIGHT
    lines = [f"main summary: {normalize_summary(s) if s else 'MISSING'}",
             f"ok-outcome weight: {w.numerator}/{w.denominator}" if w is not None else "ok-outcome weight: none"]
    return CaseResult("consensus", ok, time.perf_counter() - start, lines, s)


CASES = {"vector": run_vector, "consensus": run_consensus}
