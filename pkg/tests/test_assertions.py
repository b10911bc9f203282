import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from osl import lang as L
from osl.algebra import BOT, UND, Weighting, er, get_algebra, ok
from osl.assertions import (Basic, BudgetExceeded, OPlus, Or, Session, Top, Weighted, fresh_lvar, osep,
                            parse_heap, parse_outcome, sat_heap, sat_outcome, substitute)

from gen import weighting

F = Fraction
H, O = parse_heap, parse_outcome
NONDET, PROB = get_algebra("nondet"), get_algebra("prob")


def test_sat_heap_examples():
    assert sat_heap(ok({}), H("emp"))
    assert sat_heap(ok({"x": 1}, {1: BOT}), H("x !|->"))
    assert sat_heap(ok({"x": 1, "y": 3}, {1: 2, 2: 3}), H("ls(x, y)"))
    assert not sat_heap(ok({"x": 1, "y": 3}, {1: 2, 2: 4}), H("ls(x, y)"))
    assert not sat_heap(ok({"x": 1}, {1: 0, 2: 0}), H("x |-> _"))
    assert sat_heap(ok({"x": 1}, {1: 0, 2: 0}), H("x |-> _ * tru"))
    assert sat_heap(ok({"x": 1}, {1: 5}), H("exists Y. x |-> Y * Y != 0"))
    assert not sat_heap(UND, H("tru"))


def test_sat_outcome_examples():
    assert sat_outcome(Weighting(NONDET, {ok({}): 1}), O("ok: emp"))
    two = Weighting(NONDET, {ok({"x": 1}, {1: 1}): 1, er({"x": 0}): 1})
    assert sat_outcome(two, O("(ok: x |-> 1) (+) (er: x = null * emp)"))
    assert not sat_outcome(two, O("ok: tru"))
    ping = Weighting(PROB, {ok({"x": 0}): F(99, 100), er({"x": 1}): F(1, 100)})
    assert sat_outcome(ping, O("(ok: x = 0 * emp) (+)_{0.99} (er: x = 1 * emp)"))
    assert not sat_outcome(ping, O("(ok: x = 0 * emp) (+)_{0.5} (er: x = 1 * emp)"))
    assert not sat_outcome(Weighting(NONDET, {UND: 1}), O("ok: tru"))
    assert sat_outcome(Weighting(NONDET, {UND: 1}), O("top"))


def test_basic_requires_full_mass():
    assert not sat_outcome(Weighting(PROB, {ok({}): F(1, 2)}), O("ok: emp"))
    assert sat_outcome(Weighting(PROB, {ok({}): F(1, 2)}), O("(ok: emp)_{0.5}"))


def test_budget():
    m = Weighting(NONDET, {ok({"x": i}): 1 for i in range(5)})
    with pytest.raises(BudgetExceeded):
        sat_outcome(m, O("(ok: tru) (+) (ok: tru)"), budget=2)


def test_osep_examples():
    F_ = H("y |-> 2")
    assert osep(Top(), F_) == Top()
    assert osep(O("ok: x |-> 1"), F_) == O("ok: x |-> 1 * y |-> 2")
    phi = OPlus(Weighted(O("ok: emp"), F(1, 2)), O("er: emp"))
    assert osep(phi, F_) == OPlus(Weighted(O("ok: y |-> 2"), F(1, 2)), O("er: y |-> 2"))


def test_substitution():
    assert substitute(H("x = e * emp"), {L.Var("x"): L.LVar("X")}) == H("X = e * emp")
    bound = H("exists X. x |-> X")
    assert substitute(bound, {L.LVar("X"): L.Const(1)}) == bound


def test_fresh_names_distinct():
    s = Session()
    s.reserve({"X0"})
    a, b = fresh_lvar(s), fresh_lvar(s)
    assert a != b and "X0" not in (a.name, b.name)


@pytest.mark.parametrize("text", ["x |-> 1 * y |-> _", "ls(x, y) * tru", "exists A, B. v |-> A * A != B * B !|->"])
def test_heap_round_trip(text):
    h = parse_heap(text)
    assert parse_heap(str(h)) == h


@pytest.mark.parametrize("text", ["ok: x |-> 1 * y |-> _", "(ok: emp) (+)_{0.99} (er: x = 1 * emp)", "top",
                                  "(ok: emp) \\/ (top)_{0}", "(er: exists B. v |-> B * x !|->) (+) top"])
def test_outcome_round_trip(text):
    phi = parse_outcome(text)
    assert parse_outcome(str(phi)) == phi


# Random outcome assertions over a handful of leaves.

LEAVES = [O(t) for t in ("ok: emp", "ok: tru", "ok: x = 1 * tru", "ok: x |-> _ * tru", "er: tru",
                         "er: x !|-> * tru")]


def assertions_for(ws):
    return st.recursive(
        st.one_of(st.sampled_from(LEAVES), st.just(Top())),
        lambda sub: st.one_of(st.builds(OPlus, sub, sub), st.builds(Or, sub, sub),
                              st.builds(Weighted, sub, st.sampled_from(ws))),
        max_leaves=3)


ASSERTIONS = {"nondet": assertions_for([F(0), F(1)]), "prob": assertions_for([F(0), F(1, 2), F(1)])}
algs = st.sampled_from(["nondet", "prob"])
STATES = (ok({"x": 1}), ok({"x": 1}, {1: 0}), ok({"x": 2}, {2: 0}), er({"x": 1}, {1: BOT}), er({}), UND)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), algs, st.data())
def test_oplus_commutes_and_associates(seed, alg, data):
    a, b, c = (data.draw(ASSERTIONS[alg]) for _ in range(3))
    m = weighting(random.Random(seed), alg, STATES)
    assert sat_outcome(m, OPlus(a, b)) == sat_outcome(m, OPlus(b, a))
    assert sat_outcome(m, OPlus(OPlus(a, b), c)) == sat_outcome(m, OPlus(a, OPlus(b, c)))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), algs, st.data())
def test_weighted_zero_iff_empty(seed, alg, data):
    a = data.draw(ASSERTIONS[alg])
    m = weighting(random.Random(seed), alg, STATES)
    assert sat_outcome(m, Weighted(a, F(0))) == (len(m) == 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), algs, st.data())
def test_drop_to_top(seed, alg, data):
    a, b = data.draw(ASSERTIONS[alg]), data.draw(ASSERTIONS[alg])
    m = weighting(random.Random(seed), alg, STATES)
    if sat_outcome(m, OPlus(a, b)):
        assert sat_outcome(m, OPlus(a, Top()))


FRAMES = [(H("y |-> 3"), {7: 3}), (H("y !|->"), {7: BOT}), (H("emp"), {}), (H("tru"), {8: 1})]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(FRAMES), algs, st.data())
def test_osep_sound(seed, frame, alg, data):
    phi = data.draw(ASSERTIONS[alg])
    F_, extra = frame
    m = weighting(random.Random(seed), alg, STATES)
    if not sat_outcome(m, phi):
        return

    def extend(s):
        if s.tag == "und":
            return s
        st_ = {**s.s, "y": 7}
        return type(s)(s.tag, ok(st_).store, ok({}, {**s.h, **extra}).heap)

    m2 = Weighting(m.alg, {extend(s): w for s, w in m.items()})
    assert sat_outcome(m2, osep(phi, F_))
