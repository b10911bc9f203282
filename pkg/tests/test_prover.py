import random

from hypothesis import given, settings, strategies as st

from osl.assertions import SymbolicHeap, Tru, parse_heap
from osl.prover import entails, infer_frame, proves_false
from osl.validation import models, semantic_entails

from gen import sym_heap

H = parse_heap


def test_proves_false_examples():
    assert proves_false(H("x |-> 1 * x |-> 2"))
    assert proves_false(H("x = 1 * x != 1"))
    assert not proves_false(H("ls(x, y)"))
    assert proves_false(H("null |-> 1"))
    assert proves_false(H("x = y * x |-> 1 * y !|->"))


def test_entails_examples():
    assert entails(H("e1 = e2 * emp"), H("ls(e1, e2)"))
    assert entails(H("x |-> 1"), H("exists X. x |-> X"))
    assert entails(H("x |-> 1 * y |-> 2"), H("x |-> 1 * tru"))
    assert not entails(H("x |-> 1 * y |-> 2"), H("x |-> 1"))
    assert not entails(H("emp"), H("x |-> 1"))
    assert not entails(H("x |-> 1"), H("x |-> 2"))


def test_entails_ls_unrolls():
    assert entails(H("x |-> y * ls(y, 0)"), H("ls(x, 0)"))
    assert entails(H("x |-> y * y |-> 0"), H("ls(x, 0)"))


def test_infer_frame_examples():
    assert H("y |-> 2") in infer_frame(H("x |-> 1 * y |-> 2"), H("x |-> 1"))
    assert H("emp") in infer_frame(H("x |-> 1"), H("x |-> 1"))
    assert H("emp") in infer_frame(H("x |-> y * ls(y, 0)"), H("ls(x, 0)"))
    assert infer_frame(H("x |-> 1"), H("y |-> 1")) == []


def test_deterministic_order():
    P, Q = H("x |-> 1 * y |-> 2 * z |-> 3"), H("tru")
    assert [str(f) for f in infer_frame(P, Q)] == [str(f) for f in infer_frame(P, Q)]


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_entails_sound_on_bounded_models(seed):
    rng = random.Random(seed)
    P = sym_heap(rng, 3)
    if rng.random() < 0.5:
        sp = list(P.spatial)[:rng.randint(0, len(P.spatial))] + ([Tru()] if rng.random() < 0.5 else [])
        Q = SymbolicHeap((), P.pure, tuple(sp))
    else:
        Q = sym_heap(rng, 3, names=("x", "y", "Y"), exists=("Y",))
    if entails(P, Q):
        assert semantic_entails(P, Q).ok


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_frames_recheck(seed):
    rng = random.Random(seed)
    P = sym_heap(rng, 4)
    Q = SymbolicHeap((), (), tuple(rng.sample(P.spatial, rng.randint(0, len(P.spatial)))))
    for F in infer_frame(P, Q):
        assert entails(P, Q.star(F))


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_proves_false_means_no_model(seed):
    P = sym_heap(random.Random(seed), 4, 2)
    if proves_false(P):
        assert next(iter(models(P)), None) is None
