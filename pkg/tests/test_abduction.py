import random

from hypothesis import given, settings, strategies as st

from osl.abduction import abduce_par, biab, triab
from osl.assertions import parse_heap
from osl.prover import entails
from osl.validation import semantic_entails

from gen import heap_pair, sym_heap

H = parse_heap


def equiv(a, b):
    return entails(a, b) and entails(b, a)


def test_abduce_par_emp():
    assert [str(m) for m in abduce_par(H("emp"), H("emp"))] == ["emp"]


def test_abduce_par_missing_both_sides():
    sols = abduce_par(H("x |-> X * tru"), H("y |-> Y * tru"))
    assert any(entails(m, H("x |-> X * y |-> Y * tru")) for m in sols)


def test_abduce_par_list_segments():
    sols = abduce_par(H("X |-> Y * ls(Y, Z)"), H("ls(X, Y) * Y |-> Z"))
    assert any(equiv(m, H("X |-> Y * Y |-> Z")) for m in sols)


def test_triab_vector_branch():
    sols = triab(H("v |-> A * A |-> _"), H("emp"))
    assert any(equiv(s.anti_frame, H("v |-> A * A |-> _")) and equiv(s.frame_left, H("emp"))
               and equiv(s.frame_right, H("v |-> A * A |-> _")) for s in sols)


def test_triab_overview():
    sols = triab(H("x |-> X"), H("y |-> Y"))
    assert any(equiv(s.anti_frame, H("x |-> X * y |-> Y")) and equiv(s.frame_left, H("y |-> Y"))
               and equiv(s.frame_right, H("x |-> X")) for s in sols)


def test_triab_emp():
    assert any(all(equiv(h, H("emp")) for h in (s.anti_frame, s.frame_left, s.frame_right))
               for s in triab(H("emp"), H("emp")))


def test_biab_emp():
    assert [(str(s.anti_frame), str(s.frame)) for s in biab(H("emp"), H("emp"))] == [("emp", "emp")]


def test_biab_vector_call():
    D, Q = H("x = Y * v |-> Y"), H("v |-> A * A |-> _")
    sols = biab(D, Q)
    assert any(entails(D.star(s.anti_frame), H("A = Y * v |-> A * x |-> _")) for s in sols)
    assert all(entails(D.star(s.anti_frame), Q.star(s.frame)) for s in sols)


def test_biab_missing_cell():
    sols = biab(H("x |-> 1"), H("x |-> 1 * y |-> 2"))
    assert any(equiv(s.anti_frame, H("y |-> 2")) and equiv(s.frame, H("emp")) for s in sols)


def test_deterministic():
    P, Q = H("x |-> X * ls(X, y)"), H("ls(x, y) * z |-> 1")
    assert [str(s) for s in triab(P, Q)] == [str(s) for s in triab(P, Q)]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_triab_solutions_recheck(seed):
    P, Q = heap_pair(random.Random(seed))
    for s in triab(P, Q):
        assert entails(s.anti_frame, P.star(s.frame_left))
        assert entails(s.anti_frame, Q.star(s.frame_right))
        assert semantic_entails(s.anti_frame, P.star(s.frame_left)).ok
        assert semantic_entails(s.anti_frame, Q.star(s.frame_right)).ok


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_triab_symmetric(seed):
    P, Q = heap_pair(random.Random(seed))
    back = triab(Q, P)
    for s in triab(P, Q):
        assert any(equiv(s.anti_frame, t.anti_frame) and equiv(s.frame_left, t.frame_right)
                   and equiv(s.frame_right, t.frame_left) for t in back)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_biab_solutions_recheck(seed):
    rng = random.Random(seed)
    D, Q = sym_heap(rng, 3), sym_heap(rng, 3)
    for s in biab(D, Q):
        assert entails(D.star(s.anti_frame), Q.star(s.frame))
