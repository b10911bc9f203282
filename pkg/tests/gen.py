"""Random symbolic heaps and entailment queries at the bounded scale."""
import random

from osl import lang as L
from osl.assertions import Dangling, Eq, Ls, Neq, PointsTo, SymbolicHeap, Tru

NAMES = ("x", "y", "X")


def term(rng, names=NAMES):
    k = rng.random()
    if k < 0.15:
        return L.Const(0)
    if k < 0.25:
        return L.Const(rng.randint(1, 3))
    n = rng.choice(names)
    return L.LVar(n) if n[0].isupper() else L.Var(n)


def addr(rng, names=NAMES):
    n = rng.choice(names)
    return L.LVar(n) if n[0].isupper() else L.Var(n)


def spatial(rng, names=NAMES):
    k = rng.random()
    if k < 0.5:
        return PointsTo(addr(rng, names), term(rng, names))
    if k < 0.7:
        return Dangling(addr(rng, names))
    if k < 0.9:
        return Ls(addr(rng, names), term(rng, names))
    return Tru()


def pure(rng, names=NAMES):
    a, b = addr(rng, names), term(rng, names)
    return Eq(a, b) if rng.random() < 0.5 else Neq(a, b)


def sym_heap(rng, max_spatial=4, max_pure=1, names=NAMES, exists=()):
    sp = tuple(spatial(rng, names) for _ in range(rng.randint(0, max_spatial)))
    pu = tuple(pure(rng, names) for _ in range(rng.randint(0, max_pure)))
    return SymbolicHeap(tuple(exists), pu, sp)


def heap_pair(rng):
    """Two heaps sharing at most three variables, four spatial atoms each."""
    return sym_heap(rng), sym_heap(rng)


# Weightings and Kleisli arrows for the algebra laws.

from fractions import Fraction  # noqa: E402

from osl.algebra import UND, Weighting, er, get_algebra, ok  # noqa: E402

STATES = (ok({"x": 1}), ok({"x": 2}), ok({"x": 1}, {1: 0}), er({"x": 1}), er({}, {2: 3}), UND)
OK_STATES = tuple(s for s in STATES if s.tag == "ok")


def weight(rng, alg):
    if get_algebra(alg).name == "prob":
        d = rng.randint(1, 12)
        return Fraction(rng.randint(0, d), d)
    return Fraction(rng.randint(0, 1))


def weighting(rng, alg, states=STATES, max_support=3):
    """A random weighting whose total mass is defined."""
    A = get_algebra(alg)
    if A.name == "det":
        return Weighting(A, {rng.choice(states): 1} if rng.random() < 0.9 else {})
    chosen = rng.sample(states, rng.randint(0, max_support))
    if A.name == "nondet":
        return Weighting(A, {s: 1 for s in chosen})
    raw = [Fraction(rng.randint(1, 6)) for _ in chosen]
    total = sum(raw) / (1 if rng.random() < 0.5 else Fraction(rng.randint(1, 6), 6))
    if not total:
        return Weighting(A)
    return Weighting(A, {s: r / max(total, sum(raw)) for s, r in zip(chosen, raw)})


def kleisli(rng, alg):
    """A random arrow from ok-states to weightings, as a lookup table."""
    table = {s: weighting(rng, alg) for s in OK_STATES}
    return lambda s: table[s]
