from fractions import Fraction

import pytest

from osl import lang as L
from osl.assertions import EMP, OPlus, Session, Top, Weighted, parse_heap, parse_outcome
from osl.casestudies import CONSENSUS_SRC, PUSH_BACK_TABLE, VECTOR_SRC, expected, push_back_table
from osl.prover import entails
from osl.symexec import (Analyzer, Config, NoRenaming, Summary, alpha_equivalent, analyze_command,
                         analyze_program, normalize_summary, simplify_outcome, weaken_to_single)
from osl.validation import Bounds, check_triple

from corpus import CORPUS

H, O = parse_heap, parse_outcome


def summaries(src, **cfg):
    return [normalize_summary(s) for s in analyze_command(L.parse_command(src), Config(**cfg))]


def has(found, pre, post):
    want = normalize_summary(Summary(H(pre), O(post)))
    return any(alpha_equivalent(s, want) for s in found)


def test_skip():
    assert [str(s) for s in summaries("skip")] == ["<ok: emp> C <ok: emp>"]
    assert [str(s) for s in summaries("skip", mode="single")] == ["<ok: emp> C <ok: emp>"]


def test_free_rows():
    found = summaries("free(e)")
    assert len(found) == 3
    assert has(found, "e |-> X", "ok: e !|->")
    assert has(found, "e !|->", "er: e !|->")
    assert has(found, "e = null * emp", "er: e = null * emp")


def test_store_and_load_rows():
    assert has(summaries("[x] <- 1"), "x |-> X", "ok: x |-> 1")
    assert has(summaries("x <- [y]"), "x = X * y |-> Y", "ok: x = Y * y |-> Y")


def test_error_row():
    assert [str(s) for s in summaries("error()")] == ["<ok: emp> C <er: emp>"]


def test_assume_rows():
    found = summaries("assume(x = 1)")
    assert has(found, "x = 1 * emp", "ok: x = 1 * emp")
    assert has(found, "x != 1 * emp", "(top)_{0}")


def test_malloc_all_paths():
    found = summaries("x := malloc()")
    assert has(found, "emp", "(ok: exists Y. x |-> Y) (+) (ok: x = null * emp)")


def test_malloc_single_path():
    found = summaries("x := malloc()", mode="single")
    assert has(found, "emp", "(ok: exists Y. x |-> Y) (+) top")
    assert has(found, "emp", "(ok: x = null * emp) (+) top")


def test_weight_assume_wraps():
    found = analyze_command(L.parse_command("assume(0.25)"), Config(algebra="prob"))
    assert [str(s.post) for s in found] == ["(ok: emp)_{0.25}"]


def test_guard_outside_simple_tests_rejected():
    from osl.symexec import UnsupportedGuard
    with pytest.raises(UnsupportedGuard):
        analyze_command(L.parse_command("assume(x <= 1)"))


def test_invariant_mode():
    found = analyze_command(L.parse_command("while x != 0 { x := 0 }"),
                            Config(mode="invariant", invariants=(EMP,)))
    assert [str(s) for s in found] == ["<ok: emp> C <(ok: 0 = x * emp) \\/ (top)_{0}>"]
    loop = analyze_command(L.parse_command("while true { skip }"), Config(mode="invariant", invariants=(EMP,)))
    assert any("(top)_{0}" in str(s.post) for s in loop)


def test_invariant_mode_rejects_prob():
    with pytest.raises(ValueError):
        Analyzer(None, Config(mode="invariant", algebra="prob"))


def test_weaken_to_single():
    phi = O("(ok: x |-> 1) (+) (er: y |-> 2)")
    assert weaken_to_single(phi) == O("(ok: x |-> 1) (+) top")
    assert weaken_to_single(phi, "right") == O("(er: y |-> 2) (+) top")
    already = O("(ok: x |-> 1) (+) top")
    assert weaken_to_single(already) == already
    with pytest.raises(ValueError):
        weaken_to_single(O("ok: emp"))


def test_push_back_table():
    table = push_back_table()
    for pre, post in PUSH_BACK_TABLE:
        want = expected(pre, post, {"v"})
        assert any(alpha_equivalent(g, want) for g in table), want


def test_push_back_row_weakens_for_reuse():
    row = expected(*PUSH_BACK_TABLE[0], {"v"})
    weak = weaken_to_single(row.post)
    assert str(weak).endswith("(+) top") and "A !|->" in str(weak)


def test_single_skip_program():
    table = analyze_program(L.parse_program("proc main() { skip }"))
    assert list(table) == ["main"] and len(table["main"]) == 1


def test_broadcast_summary_prob():
    table = analyze_program(L.parse_program(CONSENSUS_SRC), Config(algebra="prob", mode="all"))
    posts = [simplify_outcome(s.post) for s in table["broadcast"]]
    assert any(isinstance(p, OPlus) and isinstance(p.left, Weighted) and p.left.weight == Fraction(99, 100)
               and "er: " in str(p.right) for p in posts)


def test_equality_sent_backwards():
    a = Analyzer(L.parse_program(CONSENSUS_SRC), Config(algebra="prob", mode="single"))
    assert any("v1 = v2" in str(s.pre) for s in a.analyze_proc("main"))


def test_rename_identity_on_fresh_names():
    a = Analyzer(None, Config())
    theta, M = a.rename(EMP, H("X1 |-> X2"), set(), {"x"}, set(), set())
    assert theta == {} and M == H("X1 |-> X2")


def test_rename_purges_program_variables():
    a = Analyzer(None, Config())
    theta, M = a.rename(H("x = Y * v |-> Y"), H("A = Y * x |-> _"), {"A"}, set(), {"x"}, set())
    assert "x" not in {v.name for v in M.program_vars()} and M.program_vars() == set()
    with pytest.raises(NoRenaming):
        a.rename(EMP, H("x |-> 1"), set(), set(), {"x"}, set())


def test_vector_precondition_after_rename():
    a = Analyzer(L.parse_program(VECTOR_SRC), Config(mode="single"))
    pres = [normalize_summary(s, keep={"v", "x"}, specialize=True).pre for s in a.analyze_proc("main")]
    assert any(entails(p, H("v |-> x * x |-> _")) and entails(H("v |-> x * x |-> _"), p) for p in pres)


def test_deterministic():
    prog = L.parse_program(VECTOR_SRC)
    runs = [[str(s) for s in Analyzer(prog, Config(mode="all")).analyze_proc("main")] for _ in range(2)]
    assert runs[0] == runs[1]


def test_json_schema():
    s = analyze_command(L.parse_command("free(x)"))[0]
    d = s.to_json()
    assert d["schema"] == 1 and {"proc", "mode", "algebra", "pre", "post", "unroll", "provenance"} <= set(d)


def _weakenings(phi):
    out = {phi}
    if isinstance(phi, OPlus):
        ls, rs = _weakenings(phi.left), _weakenings(phi.right)
        out |= {OPlus(a, b) for a in ls for b in rs}
        out |= {OPlus(a, Top()) for a in ls} | {OPlus(b, Top()) for b in rs}
    if isinstance(phi, Weighted):
        out |= {Weighted(b, phi.weight) for b in _weakenings(phi.body)}
    out |= {OPlus(x, Top()) for x in list(out)} | {Top()}
    return {simplify_outcome(x) for x in out}


@pytest.mark.parametrize("name, src, algs", [c for c in CORPUS if c[0] in (
    "free", "store", "load", "if_null", "if_eq", "choice", "choice_heap", "malloc", "call_choice",
    "pchoice", "pchoice_error", "while_heap")])
def test_single_path_refines_all_paths(name, src, algs):
    prog = L.parse_program(src)
    for alg in algs:
        every = [normalize_summary(s) for s in
                 Analyzer(prog, Config(algebra=alg, mode="all", unroll=2)).analyze_proc("main")]
        for s in Analyzer(prog, Config(algebra=alg, mode="single", unroll=2)).analyze_proc("main"):
            n = normalize_summary(s)
            same_pre = [a for a in every if alpha_equivalent(Summary(a.pre, Top()), Summary(n.pre, Top()))]
            if same_pre:
                assert any(alpha_equivalent(Summary(a.pre, w), n) for a in same_pre for w in _weakenings(a.post)), n
            else:
                # A branch explored alone can need less than either joint precondition.
                assert check_triple(prog.procs["main"].body, s, alg, program=prog, bounds=Bounds(max_models=60)).ok
