"""Bi-abductive symbolic execution producing (pre, post) summaries."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from . import lang as L
from .abduction import biab, triab
from .algebra import OutcomeAlgebra, get_algebra
from .assertions import (EMP, Basic, Dangling, Eq, Ls, Neq, OPlus, Or, Outcome, PointsTo, Pure, Session,
                         SymbolicHeap, Top, Tru, Weighted, atom_vars, basics, canonical_outcome, fold,
                         map_basic, outcome_free_lvars, outcome_names, substitute, term_vars)
from .prover import context_of, entails, proves_false

SCHEMA_VERSION = 1


class UnsupportedGuard(Exception):
    pass


class NoRenaming(Exception):
    pass


@dataclass(frozen=True)
class Summary:
    pre: SymbolicHeap
    post: Outcome
    proc: str = ""
    mode: str = "all"
    algebra: str = "nondet"
    unroll: int = 3
    provenance: Tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"<ok: {self.pre}> {self.proc or 'C'} <{self.post}>"

    def to_json(self) -> dict:
        return {"schema": SCHEMA_VERSION, "proc": self.proc, "mode": self.mode, "algebra": self.algebra,
                "pre": str(self.pre), "post": outcome_to_json(self.post), "post_text": str(self.post),
                "unroll": self.unroll, "provenance": list(self.provenance)}


def outcome_to_json(phi: Outcome):
    if isinstance(phi, Top):
        return {"top": True}
    if isinstance(phi, Or):
        return {"or": [outcome_to_json(phi.left), outcome_to_json(phi.right)]}
    if isinstance(phi, OPlus):
        return {"oplus": [outcome_to_json(phi.left), outcome_to_json(phi.right)]}
    if isinstance(phi, Weighted):
        return {"weight": str(phi.weight), "body": outcome_to_json(phi.body)}
    return {"tag": phi.tag, "heap": str(phi.heap)}


@dataclass
class Config:
    algebra: str = "nondet"
    mode: str = "all"            # all | single | invariant
    unroll: int = 3
    summary_cap: int = 32
    abduction_cap: int = 8
    invariants: Tuple[SymbolicHeap, ...] = ()


Pair = Tuple[SymbolicHeap, Outcome, Tuple[str, ...]]
NOMODS: frozenset = frozenset()


# ------------------------------------------------------------ simplification


def simplify_heap(h: SymbolicHeap) -> SymbolicHeap:
    """Eliminate existentials fixed by an equality, then canonicalize."""
    h = h.canonical()
    changed = True
    while changed:
        changed = False
        for i, a in enumerate(h.pure):
            if not isinstance(a, Eq):
                continue
            for x, t in ((a.left, a.right), (a.right, a.left)):
                if isinstance(x, L.LVar) and x.name in h.exists and x not in term_vars(t):
                    rest = SymbolicHeap((), h.pure[:i] + h.pure[i + 1:], h.spatial)
                    body = rest.subst({x: t})
                    h = SymbolicHeap(tuple(e for e in h.exists if e != x.name), body.pure, body.spatial).canonical()
                    changed = True
                    break
            if changed:
                break
    return _drop_free_disequalities(h)


def _drop_free_disequalities(h: SymbolicHeap) -> SymbolicHeap:
    """∃X. x ≠ X holds outright: values are unbounded, so X can always avoid finitely many terms."""
    loose = set(h.exists)
    for a in h.spatial:
        loose -= {v.name for v in atom_vars(a)}
    for a in h.pure:
        if isinstance(a, Eq):
            loose -= {v.name for v in atom_vars(a)}
    if not loose:
        return h
    pure = tuple(a for a in h.pure if not ({v.name for v in atom_vars(a) if isinstance(v, L.LVar)} & loose))
    used = set()
    for a in pure + h.spatial:
        used |= {v.name for v in atom_vars(a)}
    return SymbolicHeap(tuple(x for x in h.exists if x in used), pure, h.spatial)


def simplify_outcome(phi: Outcome) -> Outcome:
    if isinstance(phi, Basic):
        return Basic(phi.tag, simplify_heap(phi.heap), phi.mods)
    if isinstance(phi, Weighted):
        body = simplify_outcome(phi.body)
        w = Fraction(phi.weight)
        if w == 1:
            return body
        if isinstance(body, Weighted):
            return Weighted(body.body, w * Fraction(body.weight))
        if w == 0:
            return Weighted(Top(), Fraction(0))
        return Weighted(body, w)
    if isinstance(phi, (OPlus, Or)):
        l, r = simplify_outcome(phi.left), simplify_outcome(phi.right)
        if isinstance(phi, OPlus):
            if _is_zero(r):
                return l
            if _is_zero(l):
                return r
            return _flatten_oplus(OPlus(l, r))
        if isinstance(phi, Or) and l == r:
            return l
        return type(phi)(l, r)
    return phi


def _summands(phi: Outcome, w: Fraction) -> List[Tuple[Outcome, Fraction]]:
    """Spread weights over ⊕: (ψ1 ⊕ ψ2)_w ≡ (ψ1)_w ⊕ (ψ2)_w."""
    if isinstance(phi, OPlus):
        return _summands(phi.left, w) + _summands(phi.right, w)
    if isinstance(phi, Weighted):
        return _summands(phi.body, w * Fraction(phi.weight))
    return [(phi, w)]


def _flatten_oplus(phi: OPlus) -> Outcome:
    """Flatten nested ⊕; when a bare ⊤ is present every other ⊤ summand merges into it."""
    parts = _summands(phi, Fraction(1))
    if not any(isinstance(b, Top) and w == 1 for b, w in parts):
        return phi
    kept = [(b, w) for b, w in parts if not isinstance(b, Top)]
    out: Outcome = Top()
    for b, w in reversed(kept):
        out = OPlus(b if w == 1 else Weighted(b, w), out)
    return out


def _is_zero(phi: Outcome) -> bool:
    return isinstance(phi, Weighted) and Fraction(phi.weight) == 0


def _pure_of_guard(e: L.Expr) -> Optional[Pure]:
    neg = False
    while isinstance(e, L.Not):
        neg = not neg
        e = e.arg
    if isinstance(e, L.BinOp) and e.op == "=":
        l, r = fold(e.left), fold(e.right)
        return Neq(l, r) if neg else Eq(l, r)
    return None


def negate(a: Pure) -> Pure:
    return Neq(a.left, a.right) if isinstance(a, Eq) else Eq(a.left, a.right)


def pure_heap(*atoms: Pure) -> SymbolicHeap:
    return SymbolicHeap((), tuple(atoms), ())


def _cells_of(h: SymbolicHeap) -> int:
    return len([a for a in h.spatial if not isinstance(a, Tru)])


# ------------------------------------------------------------------ analyzer


class Analyzer:
    def __init__(self, program: Optional[L.Program] = None, cfg: Optional[Config] = None,
                 session: Optional[Session] = None):
        self.program = program
        self.cfg = cfg or Config()
        self.alg: OutcomeAlgebra = get_algebra(self.cfg.algebra)
        self.session = session or Session()
        self.table: Dict[str, List[Summary]] = {}
        self._lib: Optional["Analyzer"] = None
        if self.cfg.mode == "invariant" and self.alg.name == "prob":
            raise ValueError("loop-invariant mode is not available for the probabilistic algebra")

    # -- helpers
    def fresh(self) -> L.LVar:
        return self.session.fresh_lvar()

    def mod(self, c: L.Command) -> Set[str]:
        return L.mod(c, self.program)

    def freshen(self, P: SymbolicHeap, phi: Outcome) -> Tuple[SymbolicHeap, Outcome]:
        names = sorted(P.free_lvars() | outcome_free_lvars(phi))
        m = {L.LVar(n): self.fresh() for n in names}
        P2 = P.subst(m)
        phi2 = substitute(phi, m)
        used = set(self.session.reserved)
        # Bound names are renamed as well to keep every name unique.
        P2 = self._fresh_bound(P2)
        phi2 = map_basic(phi2, lambda b: Basic(b.tag, self._fresh_bound(b.heap)))
        return P2, phi2

    def _fresh_bound(self, h: SymbolicHeap) -> SymbolicHeap:
        if not h.exists:
            return h
        m = {L.LVar(x): self.fresh() for x in h.exists}
        body = SymbolicHeap((), h.pure, h.spatial).subst(m)
        return SymbolicHeap(tuple(m[L.LVar(x)].name for x in h.exists), body.pure, body.spatial)

    def _cap(self, pairs: List[Pair]) -> List[Pair]:
        seen = {}
        for P, phi, prov in pairs:
            P = simplify_heap(P)
            if proves_false(P.open(set())[0]):
                continue
            phi = simplify_outcome(phi)
            k = (str(P), str(phi))
            seen.setdefault(k, (P, phi, prov))
        out = list(seen.values())
        single = self.cfg.mode == "single"

        def key(p):
            tags = [b.tag for b in basics(p[1])]
            er_first = 0 if "er" in tags else 1
            ok_first = 0 if "ok" in tags else 1
            return ((er_first if single else ok_first), len(str(p[0])) + len(str(p[1])), str(p[0]), str(p[1]))

        out.sort(key=key)
        return out[:self.cfg.summary_cap]

    # -- commands
    def analyze(self, c: L.Command) -> List[Pair]:
        c = L.desugar(c) if not L.is_core(c) else c
        return self._cap(self._analyze(c))

    def _analyze(self, c: L.Command) -> List[Pair]:
        if isinstance(c, L.Skip):
            return [(EMP, Basic("ok", EMP, NOMODS), ("skip",))]
        if isinstance(c, L.Seq):
            return self._seq_cmd(c)
        if isinstance(c, L.Choice):
            return self._choice(c)
        if isinstance(c, L.Assume):
            return self._assume(c)
        if isinstance(c, L.While):
            return self._while(c)
        if isinstance(c, L.Assign):
            return self._assign(c)
        if isinstance(c, L.Alloc):
            X = self.fresh()
            Y = self.fresh()
            x = L.Var(c.var)
            return [(pure_heap(Eq(x, X)), Basic("ok", SymbolicHeap((Y.name,), (), (PointsTo(x, Y),)), frozenset({c.var})), ("alloc",))]
        if isinstance(c, L.Free):
            e = c.addr
            X = self.fresh()
            return [
                (SymbolicHeap((), (), (PointsTo(e, X),)), Basic("ok", SymbolicHeap((), (), (Dangling(e),)), NOMODS), ("free-ok",)),
                (SymbolicHeap((), (), (Dangling(e),)), Basic("er", SymbolicHeap((), (), (Dangling(e),)), NOMODS), ("free-er-dangling",)),
                (pure_heap(Eq(e, L.NULL)), Basic("er", pure_heap(Eq(e, L.NULL)), NOMODS), ("free-er-null",)),
            ]
        if isinstance(c, L.Store):
            e1, e2 = c.addr, c.value
            X = self.fresh()
            return [
                (SymbolicHeap((), (), (PointsTo(e1, X),)), Basic("ok", SymbolicHeap((), (), (PointsTo(e1, e2),)), NOMODS), ("store-ok",)),
                (SymbolicHeap((), (), (Dangling(e1),)), Basic("er", SymbolicHeap((), (), (Dangling(e1),)), NOMODS), ("store-er-dangling",)),
                (pure_heap(Eq(e1, L.NULL)), Basic("er", pure_heap(Eq(e1, L.NULL)), NOMODS), ("store-er-null",)),
            ]
        if isinstance(c, L.Load):
            x, e = L.Var(c.var), c.addr
            X, Y = self.fresh(), self.fresh()
            e_post = _subst_expr(e, {x: X})
            return [
                (SymbolicHeap((), (Eq(x, X),), (PointsTo(e, Y),)),
                 Basic("ok", SymbolicHeap((), (Eq(x, Y),), (PointsTo(e_post, Y),)), frozenset({c.var})), ("load-ok",)),
                (SymbolicHeap((), (), (Dangling(e),)), Basic("er", SymbolicHeap((), (), (Dangling(e),)), NOMODS), ("load-er-dangling",)),
                (pure_heap(Eq(e, L.NULL)), Basic("er", pure_heap(Eq(e, L.NULL)), NOMODS), ("load-er-null",)),
            ]
        if isinstance(c, L.Error):
            return [(EMP, Basic("er", EMP, NOMODS), ("error",))]
        if isinstance(c, L.Call):
            return self._call(c)
        raise TypeError(f"cannot analyze {c!r}")

    def _assign(self, c: L.Assign) -> List[Pair]:
        x = L.Var(c.var)
        X = self.fresh()
        e = _subst_expr(c.expr, {x: X})
        return [(pure_heap(Eq(x, X)), Basic("ok", pure_heap(Eq(x, e)), frozenset({c.var})), ("assign",))]

    def _assume(self, c: L.Assume) -> List[Pair]:
        e = c.cond
        if not L.expr_vars(e):
            from .concrete import eval_expr
            a = eval_expr(e, {})
            if not self.alg.is_weight(a):
                raise UnsupportedGuard(f"assume({L.show_expr(e)}) is not a {self.alg.name} weight")
            return [(EMP, Weighted(Basic("ok", EMP, NOMODS), Fraction(a)), ("assume-weight",))]
        b = _pure_of_guard(e)
        if b is None:
            raise UnsupportedGuard(f"assume({L.show_expr(e)}) is not a simple test")
        return [(pure_heap(b), Basic("ok", pure_heap(b), NOMODS), ("assume-true",)),
                (pure_heap(negate(b)), Weighted(Top(), Fraction(0)), ("assume-false",))]

    def _seq_cmd(self, c: L.Seq) -> List[Pair]:
        s1 = self.analyze(c.first)
        s2 = self.analyze(c.second)
        xs = self.mod(c.second)
        avoid = self.mod(c.first)
        out: List[Pair] = []
        for P, phi, prov in s1:
            for M, psi, prov2 in self.seq(phi, s2, xs, avoid):
                out.append((P.star(M), psi, prov + prov2))
        return out

    def _choice(self, c: L.Choice) -> List[Pair]:
        s1 = self.analyze(c.left)
        s2 = self.analyze(c.right)
        if self.cfg.mode == "single":
            # A branch whose outcome is already ⊤ says nothing once the other side is dropped.
            return ([(P, OPlus(phi, Top()), prov + ("choice-left",)) for P, phi, prov in s1
                     if not isinstance(simplify_outcome(OPlus(phi, Top())), Top)]
                    + [(P, OPlus(Top(), phi), prov + ("choice-right",)) for P, phi, prov in s2
                       if not isinstance(simplify_outcome(OPlus(Top(), phi)), Top)])
        xs = self.mod(c.left) | self.mod(c.right)
        out: List[Pair] = []
        for M1, psi1, p1 in s1:
            for M2, psi2, p2 in s2:
                for M, a, b in self.triab_adapt(M1, M2, psi1, psi2, xs, set()):
                    out.append((M, OPlus(a, b), p1 + p2 + ("choice",)))
        return out

    def _while(self, c: L.While) -> List[Pair]:
        body = self.analyze(c.body)
        xs = self.mod(c.body)
        guard = c.cond
        if not L.expr_vars(guard):
            from .concrete import eval_expr
            g = eval_expr(guard, {})
            exit_pre = EMP if g == 0 else None
            enter = EMP if g == 1 else None
            if g not in (0, 1):
                raise UnsupportedGuard(f"loop guard {L.show_expr(guard)} is not boolean")
        else:
            b = _pure_of_guard(guard)
            if b is None:
                raise UnsupportedGuard(f"loop guard {L.show_expr(guard)} is not a simple test")
            exit_pre = pure_heap(negate(b))
            enter = pure_heap(b)
        if self.cfg.mode == "invariant":
            return self._while_invariant(c, body, xs, exit_pre, enter)
        exit_pairs: List[Pair] = []
        if exit_pre is not None:
            exit_pairs = [(exit_pre, Basic("ok", exit_pre, NOMODS), ("while-exit",))]
        S: List[Pair] = []
        for _ in range(self.cfg.unroll + 1):
            nxt = list(exit_pairs)
            if enter is not None:
                for M1, phi, p1 in self.seq(Basic("ok", enter, NOMODS), body, xs, set()):
                    for M2, psi, p2 in self.seq(phi, S, xs, xs):
                        nxt.append((enter.star(M1).star(M2), psi, p1 + p2 + ("while-iter",)))
            S = self._cap(nxt)
        return S

    def _while_invariant(self, c, body, xs, exit_pre, enter) -> List[Pair]:
        candidates = list(self.cfg.invariants) or [EMP]
        for P, phi, _ in body:
            if isinstance(phi, Basic) and phi.tag == "ok":
                candidates.append(phi.heap)
        out: List[Pair] = []
        seen = set()
        for I in candidates:
            if str(I) in seen:
                continue
            seen.add(str(I))
            start = I.star(enter) if enter is not None else None
            ok = True
            if start is not None:
                ok = False
                for M, psi, _ in self.seq(Basic("ok", start), body, xs, set()):
                    if entails(M, EMP) and outcome_implies_ok(simplify_outcome(psi), I):
                        ok = True
                        break
            if not ok:
                continue
            post_exit = Basic("ok", I.star(exit_pre)) if exit_pre is not None else Weighted(Top(), Fraction(0))
            out.append((I, Or(post_exit, Weighted(Top(), Fraction(0))), ("while-invariant",)))
        return out

    def _call(self, c: L.Call) -> List[Pair]:
        if self.program is None or c.proc not in self.program.procs:
            raise L.ProgramError(f"unknown procedure {c.proc}")
        proc = self.program.procs[c.proc]
        table = self._library().analyze_proc(c.proc) if self.cfg.mode == "single" else self.analyze_proc(c.proc)
        formals = [L.Var(x) for x in proc.params]
        Xs = [self.fresh() for _ in formals]
        sub = dict(zip(formals, Xs))
        rebound = frozenset(x for x, e in zip(proc.params, c.args) if e != L.Var(x))
        bind = pure_heap(*[Eq(x, _subst_expr(e, sub)) for x, e in zip(formals, c.args)])
        S = [(s.pre, s.post, ("call:" + c.proc,)) for s in table]
        if self.cfg.mode == "single":
            S = [(P, w, prov) for P, phi, prov in S for w in weaken_all(phi)]
        xs = self.mod(c)
        out: List[Pair] = []
        for P, phi, prov in self.seq(Basic("ok", bind, rebound), S, xs, set(rebound)):
            pre = P.star(pure_heap(*[Eq(x, X) for x, X in zip(formals, Xs)]))
            out.append((pre, phi, prov))
        return out

    # -- sequencing (seq, biab', triab')
    def seq(self, phi: Outcome, S: List[Pair], xs: Set[str], avoid: Set[str]) -> List[Tuple[SymbolicHeap, Outcome, Tuple[str, ...]]]:
        if isinstance(phi, Top):
            return [(EMP, Top(), ())]
        if isinstance(phi, Basic) and phi.tag == "er":
            return [(EMP, phi, ())]
        if isinstance(phi, Weighted):
            if Fraction(phi.weight) == 0:
                return [(EMP, phi, ())]
            return [(M, Weighted(psi, phi.weight), p) for M, psi, p in self.seq(phi.body, S, xs, avoid)]
        if isinstance(phi, (Or, OPlus)):
            out = []
            left = self.seq(phi.left, S, xs, avoid)
            right = self.seq(phi.right, S, xs, avoid)
            for M1, psi1, p1 in left:
                for M2, psi2, p2 in right:
                    for M, a, b in self.triab_adapt(M1, M2, psi1, psi2, xs, avoid):
                        out.append((M, type(phi)(a, b), p1 + p2))
            return self._cap_seq(out)
        out = []
        for Q, psi, prov in S:
            Q2, psi2 = self.freshen(Q, psi)
            for M, post in self.biab_adapt(phi.heap, Q2, psi2, xs, avoid):
                out.append((M, _add_mods(post, phi.mods), prov))
        return self._cap_seq(out)

    def _cap_seq(self, out):
        seen = {}
        for M, psi, p in out:
            M = simplify_heap(M)
            psi = simplify_outcome(psi)
            seen.setdefault((str(M), str(psi)), (M, psi, p))
        vals = list(seen.values())
        vals.sort(key=lambda t: (len(t[0].spatial), len(str(t[0])), str(t[0]), str(t[1])))
        return vals[: self.cfg.summary_cap]

    def biab_adapt(self, P: SymbolicHeap, Q: SymbolicHeap, psi: Outcome, xs: Set[str],
                   avoid: Set[str]) -> List[Tuple[SymbolicHeap, Outcome]]:
        used = P.all_names() | Q.all_names() | outcome_names(psi)
        Pq = self._fresh_bound(P)
        Zs = set(Pq.exists)
        delta = SymbolicHeap((), Pq.pure, Pq.spatial)
        Ys = Q.free_lvars() | outcome_free_lvars(psi)
        out = []
        for sol in biab(delta, Q, self.cfg.abduction_cap):
            try:
                theta, M2 = self.rename(delta, sol.anti_frame, Ys, xs, avoid | Zs, Zs)
            except NoRenaming:
                continue
            F = sol.frame
            post = self.frame_post(psi, F, xs, set(), _pre_values(Q))
            post = substitute(post, theta)
            post = _map_leaves(post, lambda b: Basic(b.tag, b.heap.close(Zs), b.mods))
            out.append((M2, post))
        return out

    def triab_adapt(self, P1, P2, psi1, psi2, xs: Set[str], avoid: Set[str]):
        if P1.is_emp and P2.is_emp and not P1.pure and not P2.pure and not P1.exists and not P2.exists:
            return [(EMP, psi1, psi2)]
        Ys = outcome_free_lvars(psi1) | outcome_free_lvars(psi2)
        out = []
        for sol in triab(P1, P2, self.cfg.abduction_cap):
            try:
                theta, M2 = self.rename(EMP, sol.anti_frame, Ys, xs, set(avoid), set())
            except NoRenaming:
                continue
            a = substitute(self.frame_post(psi1, sol.frame_left, xs, set()), theta)
            b = substitute(self.frame_post(psi2, sol.frame_right, xs, set()), theta)
            out.append((M2, a, b))
        return out

    def frame_post(self, psi: Outcome, F: SymbolicHeap, xs: Set[str], Zs: Set[str],
                   pre_values: Optional[Dict[str, L.LVar]] = None) -> Outcome:
        """ψ ⊛ ∃Z⃗X⃗. F[X⃗/x⃗], framing each leaf over the variables its path may modify.

        x = X′ in the callee pre names the old value of x, so X′ is reused for it.
        """
        pre_values = pre_values or {}
        if F.is_emp and not F.pure and not F.exists:
            return psi

        def leaf(b: Basic) -> Basic:
            ws = xs if b.mods is None else b.mods
            mentioned = sorted(v for v in ws if v in F.program_vars())
            m = {L.Var(x): pre_values.get(x) or self.fresh() for x in mentioned}
            F2 = F.subst(m)
            names = set(Zs) | {v.name for x, v in m.items() if x.name not in pre_values}
            F2 = F2.close(names)
            return Basic(b.tag, b.heap.star(F2), b.mods)

        return _map_leaves(psi, leaf)

    def rename(self, delta: SymbolicHeap, M: SymbolicHeap, Ys: Set[str], xs: Set[str],
               forbidden: Set[str], Zs: Set[str]):
        """Choose e⃗ for Y⃗ and an anti-frame M′ avoiding the forbidden names."""
        Mo = M.rename_bound(delta.all_names() | set(Ys) | set(forbidden))
        mex = set(Mo.exists)
        ctx = context_of(delta.pure + Mo.pure, delta.spatial + Mo.spatial)

        def allowed_for_e(t) -> bool:
            names = {v.name for v in term_vars(t)}
            return not (names & (set(Ys) | mex)) and not any(
                isinstance(v, L.Var) and v.name in xs for v in term_vars(t))

        theta: Dict[L.LVar, L.Expr] = {}
        for y in sorted(Ys):
            cls = ctx.class_of(L.LVar(y))
            cands = [t for t in cls if t != L.LVar(y) and allowed_for_e(t)]
            if cands:
                # An opened existential of Δ is the last resort; it is re-bound in the post.
                theta[L.LVar(y)] = min(cands, key=lambda t: (bool({v.name for v in term_vars(t)} & set(Zs)),
                                                             _e_pref(t)))
        Mt = SymbolicHeap(Mo.exists, Mo.pure, Mo.spatial).subst(theta).canonical()
        # Replace forbidden names in the anti-frame by equal allowed terms.
        ctx2 = context_of(delta.pure + Mt.pure, delta.spatial + Mt.spatial)
        bad = {v for a in Mt.atoms() for v in atom_vars(a)
               if v.name in forbidden and not (isinstance(v, L.LVar) and v.name in mex)}
        repl: Dict = {}
        ctx0 = context_of(delta.pure, delta.spatial)
        for v in sorted(bad, key=lambda v: v.name):
            # Prefer terms equal to v by Δ alone, so M′ keeps what M says about v.
            cands = [t for t in ctx0.class_of(v)
                     if not ({w.name for w in term_vars(t)} & (set(forbidden) | mex)) and t != v]
            cands = cands or [t for t in ctx2.class_of(v)
                     if not ({w.name for w in term_vars(t)} & (set(forbidden) | mex)) and t != v]
            if not cands:
                raise NoRenaming(f"{v} has no admissible equal term")
            repl[v] = min(cands, key=_e_pref)
        M2 = Mt.subst(repl) if repl else Mt
        M2 = simplify_heap(M2)
        if repl and not entails(delta.star(M2), delta.star(Mt)):
            raise NoRenaming("renamed anti-frame is not strong enough")
        return theta, M2

    def _library(self) -> "Analyzer":
        """All-paths summaries of callees, reused (weakened) by single-path callers."""
        if self._lib is None:
            self._lib = Analyzer(self.program, replace(self.cfg, mode="all"), self.session)
        return self._lib

    # -- procedures
    def analyze_proc(self, name: str) -> List[Summary]:
        if name in self.table:
            return self.table[name]
        proc = self.program.procs[name]
        for callee in sorted(L.called_procs(proc.body)):
            self.analyze_proc(callee)
        pairs = self.analyze(L.desugar(proc.body))
        self.table[name] = [Summary(P, phi, name, self.cfg.mode, self.alg.name, self.cfg.unroll, prov)
                            for P, phi, prov in pairs]
        return self.table[name]

    def analyze_program(self) -> Dict[str, List[Summary]]:
        for name in self.program.topo_order():
            self.analyze_proc(name)
        return self.table


def _map_leaves(phi: Outcome, f) -> Outcome:
    if isinstance(phi, Basic):
        return f(phi)
    if isinstance(phi, (Or, OPlus)):
        return type(phi)(_map_leaves(phi.left, f), _map_leaves(phi.right, f))
    if isinstance(phi, Weighted):
        return Weighted(_map_leaves(phi.body, f), phi.weight)
    return phi


def _add_mods(phi: Outcome, w: Optional[frozenset]) -> Outcome:
    def f(b: Basic) -> Basic:
        mods = None if (w is None or b.mods is None) else b.mods | w
        return Basic(b.tag, b.heap, mods)
    return _map_leaves(phi, f)


def _pre_values(Q: SymbolicHeap) -> Dict[str, L.LVar]:
    """Program variables pinned to a free logical variable by the pre."""
    out: Dict[str, L.LVar] = {}
    for a in Q.pure:
        if isinstance(a, Eq):
            for x, t in ((a.left, a.right), (a.right, a.left)):
                if isinstance(x, L.Var) and isinstance(t, L.LVar) and t.name not in Q.exists:
                    out.setdefault(x.name, t)
    return out


def _e_pref(t):
    if isinstance(t, L.Var):
        return (0, t.name)
    if isinstance(t, L.Const):
        return (1, str(t.value))
    if isinstance(t, L.LVar):
        return (2, t.name)
    return (3, str(t))


def _subst_expr(e: L.Expr, m) -> L.Expr:
    from .assertions import subst_term
    return subst_term(e, m)


def weaken_to_single(phi: Outcome, side: str = "left") -> Outcome:
    """ψ1 ⊕ ψ2 ⇒ ψ_side ⊕ ⊤."""
    if not isinstance(phi, OPlus):
        raise ValueError("weaken_to_single expects an ⊕ assertion")
    if side == "left":
        return OPlus(phi.left, Top())
    return OPlus(phi.right, Top())


def weaken_all(phi: Outcome) -> List[Outcome]:
    """Every single-outcome weakening of a top-level ⊕, or φ itself."""
    if not isinstance(phi, OPlus):
        return [phi]
    out = []
    for side in ("left", "right"):
        w = weaken_to_single(phi, side)
        if w not in out:
            out.append(w)
    return out


def outcome_implies_ok(psi: Outcome, I: SymbolicHeap) -> bool:
    if isinstance(psi, Basic):
        return psi.tag == "ok" and entails(psi.heap, I)
    if isinstance(psi, Or):
        return outcome_implies_ok(psi.left, I) and outcome_implies_ok(psi.right, I)
    if isinstance(psi, OPlus):
        if _is_zero(psi.right):
            return outcome_implies_ok(psi.left, I)
        if _is_zero(psi.left):
            return outcome_implies_ok(psi.right, I)
    if isinstance(psi, Weighted) and Fraction(psi.weight) == 1:
        return outcome_implies_ok(psi.body, I)
    return False


def analyze_command(c: L.Command, cfg: Optional[Config] = None, program: Optional[L.Program] = None) -> List[Summary]:
    cfg = cfg or Config()
    a = Analyzer(program, cfg)
    return [Summary(P, phi, "", cfg.mode, cfg.algebra, cfg.unroll, prov) for P, phi, prov in a.analyze(c)]


def analyze_program(program: L.Program, cfg: Optional[Config] = None) -> Dict[str, List[Summary]]:
    return Analyzer(program, cfg or Config()).analyze_program()


# ------------------------------------------------------------- presentation


def _leaves(phi: Outcome) -> List[Basic]:
    return list(basics(phi))


def _summary_lvars(pre: SymbolicHeap, post: Outcome) -> Set[str]:
    return pre.free_lvars() | outcome_free_lvars(post)


def _occurrences(name: str, pre: SymbolicHeap, post: Outcome) -> Tuple[int, int]:
    v = L.LVar(name)
    n_pre = sum(1 for a in pre.atoms() for t in _atom_leaves(a) if t == v)
    n_post = sum(1 for b in basics(post) if name in b.heap.free_lvars()
                 for a in b.heap.atoms() for t in _atom_leaves(a) if t == v)
    return n_pre, n_post


def _atom_leaves(a) -> List:
    from .assertions import atom_terms
    out = []
    for t in atom_terms(a):
        out.extend(term_vars(t))
    return out


def _drop_unconstrained(pre: SymbolicHeap, post: Outcome) -> SymbolicHeap:
    """x = X with X mentioned nowhere else carries no information."""
    changed = True
    while changed:
        changed = False
        for i, a in enumerate(pre.pure):
            if not isinstance(a, Eq):
                continue
            for x, t in ((a.left, a.right), (a.right, a.left)):
                if isinstance(t, L.LVar) and t.name not in pre.exists and \
                        _occurrences(t.name, pre, post) == (1, 0) and not isinstance(x, L.LVar):
                    pre = SymbolicHeap(pre.exists, pre.pure[:i] + pre.pure[i + 1:], pre.spatial)
                    changed = True
                    break
            if changed:
                break
    return pre


def _leaf_eq(b: Basic, x: str) -> Optional[L.LVar]:
    for a in b.heap.pure:
        if isinstance(a, Eq):
            for u, t in ((a.left, a.right), (a.right, a.left)):
                if u == L.Var(x) and isinstance(t, L.LVar) and t.name not in b.heap.exists:
                    return t
    return None


def _specialize(pre: SymbolicHeap, post: Outcome) -> Tuple[SymbolicHeap, Outcome]:
    """Strengthen the pre with x = X whenever every outcome ends with x = X.

    Each step is a consequence-rule instance: the pre only gets stronger, and
    within each outcome x = X lets X be replaced by x before the equality is dropped.
    """
    leaves = _leaves(post)
    if not leaves:
        return pre, post
    xs = sorted(set().union(*[b.heap.program_vars() for b in leaves]))
    for x in xs:
        Xs = {_leaf_eq(b, x) for b in leaves}
        if len(Xs) != 1 or None in Xs:
            continue
        X = Xs.pop()
        if X.name not in pre.free_lvars():
            continue
        strong = pre.add_pure(Eq(L.Var(x), X))
        if proves_false(strong.open(set())[0]):
            continue
        pre = strong.subst({X: L.Var(x)})
        pre = SymbolicHeap(pre.exists, tuple(a for a in pre.pure
                                             if not (isinstance(a, Eq) and a.left == a.right)), pre.spatial)

        def leaf(b: Basic, X=X, x=x) -> Basic:
            h = b.heap.subst({X: L.Var(x)})
            return Basic(b.tag, simplify_heap(h), b.mods)

        post = _map_leaves(post, leaf)
        # x = X′ left over from the pre is now unconstrained.
        pre = _drop_unconstrained(simplify_heap(pre), post)
    return pre, post


def _hide(post: Outcome, keep: Set[str], session: Session) -> Outcome:
    """Existentially abstract program variables outside `keep` (a weakening)."""
    def leaf(b: Basic) -> Basic:
        hidden = sorted(v for v in b.heap.program_vars() if v not in keep)
        if not hidden:
            return b
        m = {L.Var(v): session.fresh_lvar() for v in hidden}
        h = b.heap.subst(m)
        h = SymbolicHeap(h.exists + tuple(t.name for t in m.values()), h.pure, h.spatial)
        return Basic(b.tag, simplify_heap(h), b.mods)
    return _map_leaves(post, leaf)


def _generalize_values(pre: SymbolicHeap, post: Outcome) -> Tuple[SymbolicHeap, Outcome]:
    """A logical variable used only as a stored value becomes an anonymous existential."""
    for name in sorted(pre.free_lvars()):
        v = L.LVar(name)
        in_pure = any(v in term_vars(t) for a in pre.pure for t in (a.left, a.right))
        in_addr = any(isinstance(a, (PointsTo, Dangling)) and v in term_vars(a.addr) or
                      isinstance(a, Ls) and (v in term_vars(a.start) or v in term_vars(a.end))
                      for a in pre.spatial)
        values = [a for a in pre.spatial if isinstance(a, PointsTo) and a.value == v]
        if in_pure or in_addr or len(values) != 1:
            continue
        ok = True
        for b in basics(post):
            h = b.heap
            if name not in h.free_lvars():
                continue
            if any(v in term_vars(t) for a in h.pure for t in (a.left, a.right)) or any(
                    not (isinstance(a, PointsTo) and a.value == v) and v in set(_atom_leaves(a))
                    for a in h.spatial):
                ok = False
        if not ok:
            continue
        pre = SymbolicHeap(pre.exists + (name,), pre.pure, pre.spatial)
        post = _map_leaves(post, lambda b, name=name: Basic(b.tag, b.heap.close([name]), b.mods))
    return pre, post


def normalize_summary(s: Summary, keep: Optional[Iterable[str]] = None, specialize: bool = False) -> Summary:
    """Presentation form of a summary, obtained by sound consequence steps only."""
    session = Session("N")
    session.reserve(s.pre.all_names() | outcome_names(s.post))
    pre, post = simplify_heap(s.pre), simplify_outcome(s.post)
    if specialize:
        pre, post = _specialize(pre, post)
    if keep is not None:
        post = _hide(post, set(keep), session)
    pre = _drop_unconstrained(pre, post)
    # A logical variable the post never mentions may as well be existential in the pre.
    pre = simplify_heap(pre.close(sorted(pre.free_lvars() - outcome_free_lvars(post))))
    pre, post = _generalize_values(pre, post)
    pre, post = simplify_heap(pre), simplify_outcome(post)
    return replace(s, pre=pre, post=post)


def _rename_all(pre: SymbolicHeap, post: Outcome, m: Dict[str, str]) -> str:
    sub = {L.LVar(k): L.LVar(v) for k, v in m.items()}
    p = simplify_heap(pre.subst(sub))
    q = simplify_outcome(substitute(post, sub))
    q = _map_leaves(q, lambda b: Basic(b.tag, _alpha_bound(b.heap)))
    return f"{_alpha_bound(p)} || {q}"


def _alpha_bound(h: SymbolicHeap) -> SymbolicHeap:
    """Rename existentials to a canonical choice (smallest printed form)."""
    import itertools
    if not h.exists or len(h.exists) > 5:
        return h
    best = None
    names = [f"_B{i}" for i in range(len(h.exists))]
    for perm in itertools.permutations(names):
        body = SymbolicHeap((), h.pure, h.spatial).subst({L.LVar(x): L.LVar(n) for x, n in zip(h.exists, perm)})
        cand = SymbolicHeap(tuple(sorted(perm)), body.pure, body.spatial).canonical()
        if best is None or str(cand) < str(best):
            best = cand
    return best


def alpha_equivalent(a: Summary, b: Summary) -> bool:
    """Equal up to a bijective renaming of free logical variables and of bound ones."""
    import itertools
    fa = sorted(_summary_lvars(a.pre, a.post))
    fb = sorted(_summary_lvars(b.pre, b.post))
    if len(fa) != len(fb) or len(fa) > 6:
        return False
    target = _rename_all(b.pre, b.post, {x: f"_F{i}" for i, x in enumerate(fb)})
    for perm in itertools.permutations(range(len(fa))):
        if _rename_all(a.pre, a.post, {x: f"_F{perm[i]}" for i, x in enumerate(fa)}) == target:
            return True
    return False
