from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from osl import lang as L
from osl.lang import (Alloc, Assign, Assume, BinOp, Call, Choice, Const, Error, Free, If, Load, Malloc, Not,
                      PChoice, Seq, Skip, Store, Var, While)


def body(src):
    return L.parse_program(src).procs["main"].body


def test_parse_skip():
    assert body("proc main() { skip }") == Skip()


def test_parse_store():
    assert body("proc main() { [x] <- 1 }") == Store(Var("x"), Const(1))


def test_parse_while():
    assert body("proc main() { while true { skip } }") == While(Const(1), Skip())


def test_statement_separators():
    assert body("proc main() {\n  x := 1\n  y := x\n}") == body("proc main() { x := 1; y := x }")


def test_parse_all_actions():
    c = body("proc f(a) { skip }\nproc main() { x := alloc(); y := malloc(); free(x); [x] <- y; z <- [x]; "
             "error(); f(z + 1); x := null }")
    kinds = []
    while isinstance(c, Seq):
        kinds.append(type(c.first))
        c = c.second
    kinds.append(type(c))
    assert kinds == [Alloc, Malloc, Free, Store, Load, Error, Call, Assign]


def test_weight_literal_is_exact():
    c = body("proc main() { skip +[0.99] error() }")
    assert isinstance(c, PChoice) and c.prob == Fraction(99, 100)


@pytest.mark.parametrize("src, msg", [
    ("proc main() { skip ", "expected '}'"),
    ("proc main() { skip }\nproc main() { skip }", "duplicate"),
    ("proc main() { g() }", "unknown"),
    ("proc f(a) { skip }\nproc main() { f() }", "arity"),
    ("proc f() { main() }\nproc main() { f() }", "cyclic"),
])
def test_program_errors(src, msg):
    with pytest.raises((L.ParseError, L.ProgramError)) as e:
        L.parse_program(src)
    assert msg in str(e.value)


def test_parse_error_has_position():
    with pytest.raises(L.ParseError) as e:
        L.parse_program("proc main() {\n  x := \n}")
    assert str(e.value).startswith("2:8:")


def test_desugar_if():
    e = BinOp("=", Var("x"), Var("y"))
    c = If(e, Skip(), Error())
    assert L.desugar(c) == Choice(Seq(Assume(e), Skip()), Seq(Assume(Not(e)), Error()))


def test_desugar_pchoice():
    c = PChoice(Fraction(99, 100), Skip(), Error())
    assert L.desugar(c) == Choice(Seq(Assume(Const(Fraction(99, 100))), Skip()),
                                  Seq(Assume(Const(Fraction(1, 100))), Error()))


def test_desugar_malloc():
    assert L.desugar(Malloc("x")) == Choice(Alloc("x"), Assign("x", L.NULL))


def test_desugar_rejects_bad_probability():
    with pytest.raises(ValueError):
        L.desugar(PChoice(Fraction(3, 2), Skip(), Skip()))


def test_mod_of_call_includes_callee_writes():
    p = L.parse_program("proc f(a) { b := a }\nproc main() { f(x); y := 1 }")
    assert L.mod(p.procs["main"].body, p) == {"a", "b", "y"}


# Random ASTs for the round-trip and desugaring properties.

names = st.sampled_from(["x", "y", "z"])
decimals = st.sampled_from([Fraction(1, 2), Fraction(99, 100), Fraction(1, 4), Fraction(0), Fraction(1)])
exprs = st.recursive(
    st.one_of(names.map(Var), st.integers(0, 5).map(Const)),
    lambda sub: st.one_of(st.builds(BinOp, st.sampled_from(L.BINOPS), sub, sub), sub.map(Not)),
    max_leaves=4)
actions = st.one_of(
    st.just(Skip()), st.just(Error()),
    st.builds(Assign, names, exprs), st.builds(Alloc, names), st.builds(Malloc, names),
    st.builds(Free, exprs), st.builds(Store, exprs, exprs), st.builds(Load, names, exprs),
    st.builds(Assume, exprs))
commands = st.recursive(
    actions,
    lambda sub: st.one_of(
        st.builds(Seq, sub, sub), st.builds(Choice, sub, sub), st.builds(While, exprs, sub),
        st.builds(If, exprs, sub, sub), st.builds(PChoice, decimals, sub, sub)),
    max_leaves=6)


@settings(max_examples=300)
@given(commands)
def test_round_trip(c):
    assert L.parse_command(L.show(c)) == c


@settings(max_examples=300)
@given(commands)
def test_desugar_idempotent_and_core(c):
    d = L.desugar(c)
    assert L.is_core(d)
    assert L.desugar(d) == d
