"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import random
import time
from fractions import Fraction

import pytest

from osl import lang as L
from osl.abduction import abduce_par, triab
from osl.algebra import UNDEFINED, bind, get_algebra, mass, normalize, scale, unit
from osl.assertions import SymbolicHeap, Tru, parse_heap
from osl.casestudies import CONSENSUS_WEIGHT, run_consensus, run_vector
from osl.prover import entails, proves_false
from osl.symexec import Analyzer, Config
from osl.validation import (STANDARD_FAMILY, _program_vars_of, alloc_negative_example, check_frame_closure,
                            check_triple, models, semantic_entails)

from corpus import CORPUS
from gen import OK_STATES, heap_pair, kleisli, sym_heap, weight, weighting

H = parse_heap


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def test_1_vector_case_study(report):
    r = run_vector()
    ok = r.ok and r.seconds < 5
    report(1, ok, f"push_back table and main error summary {'reproduced' if r.ok else 'MISSING'}, "
                  f"{r.seconds:.2f}s (limit 5s)")


def test_2_consensus_case_study(report):
    r = run_consensus()
    ok = r.ok and r.seconds < 10
    report(2, ok, f"{r.lines[-1]} (want {CONSENSUS_WEIGHT}), {r.seconds:.2f}s (limit 10s)")


def test_3_abduce_par_fixtures(report):
    a = abduce_par(H("x |-> X * tru"), H("y |-> Y * tru"))
    b = abduce_par(H("X |-> Y * ls(Y, Z)"), H("ls(X, Y) * Y |-> Z"))
    want_b = H("X |-> Y * Y |-> Z")
    ok_a = any(entails(m, H("x |-> X * y |-> Y * tru")) for m in a)
    ok_b = any(entails(m, want_b) and entails(want_b, m) for m in b)
    report(3, ok_a and ok_b, f"missing cells on both sides: {ok_a}; list-segment remark: {ok_b}")


def test_4_triab_soundness(report):
    rng = random.Random(2024)
    start = time.perf_counter()
    solutions = violations = 0
    for _ in range(500):
        P, Q = heap_pair(rng)
        for s in triab(P, Q):
            solutions += 1
            for side, F in ((P, s.frame_left), (Q, s.frame_right)):
                goal = side.star(F)
                if not entails(s.anti_frame, goal) or not semantic_entails(s.anti_frame, goal).ok:
                    violations += 1
    secs = time.perf_counter() - start
    report(4, violations == 0 and secs < 120,
           f"500 pairs, {solutions} solutions, {violations} violations, {secs:.1f}s (limit 120s)")


FORMS = (L.Skip, L.Seq, L.Choice, L.Assume, L.While, L.If, L.PChoice, L.Assign, L.Alloc, L.Malloc, L.Free,
         L.Store, L.Load, L.Error, L.Call)


def _forms(c, out):
    out.add(type(c))
    for s in L.subcommands(c):
        _forms(s, out)


def test_5_summary_soundness(report):
    start = time.perf_counter()
    seen, algs = set(), set()
    checked, bad = 0, []
    for name, src, algebras in CORPUS:
        prog = L.parse_program(src)
        for p in prog.procs.values():
            _forms(p.body, seen)
        for alg in algebras:
            algs.add(alg)
            for mode in ("all", "single"):
                a = Analyzer(prog, Config(algebra=alg, mode=mode, unroll=3))
                for pn in prog.topo_order():
                    for s in a.analyze_proc(pn):
                        v = check_triple(prog.procs[pn].body, s, alg, STANDARD_FAMILY, program=prog)
                        checked += 1
                        if v.status != "valid":
                            bad.append(f"{name}/{alg}/{mode}/{pn}: {v.status} {s}")
    secs = time.perf_counter() - start
    missing = [f.__name__ for f in FORMS if f not in seen]
    ok = not bad and not missing and len(CORPUS) >= 30 and algs == {"det", "nondet", "prob"} and secs < 300
    report(5, ok, f"{len(CORPUS)} programs, {checked} summaries, {len(bad)} not valid, "
                  f"forms missing {missing or 'none'}, {secs:.1f}s (limit 300s)" + "".join("\n  " + b for b in bad[:5]))


def test_6_frame_closure(report):
    rng = random.Random(42)
    pool = []
    for name, src, algebras in CORPUS:
        prog = L.parse_program(src)
        if len(prog.procs) > 1:
            continue
        for alg in algebras:
            for s in Analyzer(prog, Config(algebra=alg, unroll=2)).analyze_proc("main"):
                pool.append((prog, alg, s))
    results = []
    while len(results) < 200:
        prog, alg, s = rng.choice(pool)
        c = prog.procs["main"].body
        free = sorted(_program_vars_of(c, prog) - L.mod(c, prog)) + ["z"]
        F = sym_heap(rng, 2, 1, names=tuple(free[:2]) + ("Z",))
        # Resample frames that leave the framed precondition without models.
        if next(iter(models(s.pre.star(F))), None) is None:
            continue
        results.append(check_frame_closure(c, s, F, alg, program=prog).status)
    c, neg = alloc_negative_example()
    rejected = check_triple(c, neg).status == "violated"
    good = results.count("valid")
    report(6, good == 200 and rejected,
           f"{good}/200 framed triples valid; negative alloc example rejected: {rejected}")


def _laws(alg, rng):
    A = get_algebra(alg)
    a, b, c = weight(rng, A), weight(rng, A), weight(rng, A)
    ab, bc = A.add(a, b), A.add(b, c)
    lhs = UNDEFINED if ab is UNDEFINED else A.add(ab, c)
    rhs = UNDEFINED if bc is UNDEFINED else A.add(a, bc)
    ok = lhs == rhs and A.add(a, b) == A.add(b, a) and A.add(a, 0) == a
    ok &= A.mul(a, 1) == a and A.mul(a, 0) == 0 and A.mul(A.mul(a, b), c) == A.mul(a, A.mul(b, c))
    if bc is not UNDEFINED:
        ok &= A.mul(a, bc) == A.add(A.mul(a, b), A.mul(a, c))
    m = weighting(rng, A)
    k1, k2 = kleisli(rng, A), kleisli(rng, A)
    sigma = rng.choice([s for s in m.support() if s.tag == "ok"] or list(OK_STATES))
    ok &= bind(unit(A, sigma), k1) == k1(sigma)
    ok &= bind(m, lambda s: unit(A, s)) == m
    lhs = bind(m, k1)
    # Totality: defined masses in, defined mass out.
    ok &= lhs is not UNDEFINED and mass(lhs) is not UNDEFINED
    ok &= bind(lhs, k2) == bind(m, lambda s: bind(k1(s), k2))
    if len(m):
        w, n = normalize(m)
        ok &= mass(n) == 1 and scale(w, n) == m
    return ok


def test_7_algebra_laws(report):
    rng = random.Random(7)
    failures = {alg: sum(not _laws(alg, rng) for _ in range(1000)) for alg in ("det", "nondet", "prob")}
    report(7, not any(failures.values()), f"1000 instances per algebra, violations {failures}")


def test_8_prover_soundness(report):
    rng = random.Random(8)
    answered_true = bad = 0
    for _ in range(1000):
        P = sym_heap(rng, 3)
        if rng.random() < 0.5:
            sp = list(P.spatial)
            rng.shuffle(sp)
            sp = sp[:rng.randint(0, len(sp))] + ([Tru()] if rng.random() < 0.5 else [])
            Q = SymbolicHeap((), P.pure[:rng.randint(0, len(P.pure))], tuple(sp))
        else:
            Q = sym_heap(rng, 3, names=("x", "y", "Y"), exists=("Y",) if rng.random() < 0.3 else ())
        if entails(P, Q):
            answered_true += 1
            bad += not semantic_entails(P, Q).ok
        if proves_false(P):
            bad += next(iter(models(P)), None) is not None
    report(8, bad == 0, f"1000 queries, {answered_true} answered true, {bad} with countermodels")
