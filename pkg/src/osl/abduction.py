"""Tri-abduction (abduce_par, triab) and bi-abduction (biab)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple

from . import lang as L
from .assertions import (Dangling, Eq, Ls, Neq, PointsTo, Pure, Spatial, SymbolicHeap, Term, Tru,
                         atom_vars, fresh_name, subst_term, term_lvars)
from .prover import PureContext, context_of, entails, infer_frame, proves_false

ABDUCTION_CAP = 8


@dataclass(frozen=True)
class TriabSolution:
    anti_frame: SymbolicHeap
    frame_left: SymbolicHeap
    frame_right: SymbolicHeap

    def __str__(self) -> str:
        return f"M = {self.anti_frame}; F1 = {self.frame_left}; F2 = {self.frame_right}"


@dataclass(frozen=True)
class BiabSolution:
    anti_frame: SymbolicHeap
    frame: SymbolicHeap

    def __str__(self) -> str:
        return f"M = {self.anti_frame}; F = {self.frame}"


def _rank(ms: List[SymbolicHeap], cap: int) -> List[SymbolicHeap]:
    seen: Dict[str, SymbolicHeap] = {}
    for m in ms:
        c = m.canonical()
        seen.setdefault(str(c), c)
    out = sorted(seen.values(), key=lambda m: (-len(m.spatial), str(m)))
    return out[:cap]


# ------------------------------------------------------------ abduce_par


class _AbducePar:
    def __init__(self, cap: int):
        self.cap = cap
        self.memo: Dict[Tuple[str, str], List[SymbolicHeap]] = {}

    def run(self, P: SymbolicHeap, Q: SymbolicHeap) -> List[SymbolicHeap]:
        key = (str(P.canonical()), str(Q.canonical()))
        if key not in self.memo:
            self.memo[key] = []
            self.memo[key] = _rank(self._run(P, Q), self.cap)
        return self.memo[key]

    def _run(self, P: SymbolicHeap, Q: SymbolicHeap) -> List[SymbolicHeap]:
        base = self._base(P, Q)
        if base is not None:
            return [base]
        for row in (self._exists, self._ls_start, self._match, self._ls_end, self._missing, self._emp_ls):
            result: List[SymbolicHeap] = []
            for sub_p, sub_q, wrap in row(P, Q):
                for m in self.run(sub_p, sub_q):
                    result.append(wrap(m))
            result = [m for m in result if not proves_false(SymbolicHeap((), m.pure, m.spatial))]
            if result:
                return result
        return []

    # -- base rules (quantifier-free inputs)
    def _base(self, P, Q) -> Optional[SymbolicHeap]:
        if P.exists or Q.exists:
            return None
        pure = P.pure + Q.pure
        if not P.spatial and not Q.spatial:
            M = SymbolicHeap((), pure, ())
            return None if proves_false(M) else M
        if P.spatial == (Tru(),):
            M = SymbolicHeap((), pure, Q.spatial)
            if not proves_false(M):
                return M
        if Q.spatial == (Tru(),):
            M = SymbolicHeap((), pure, P.spatial)
            if not proves_false(M):
                return M
        return None

    # -- rows; each yields (P', Q', M' ↦ M)
    def _exists(self, P, Q):
        if not (P.exists or Q.exists):
            return
        Pq = P.rename_bound(Q.all_names())
        Qq = Q.rename_bound(Pq.all_names())
        xs = Pq.exists + Qq.exists
        yield (SymbolicHeap((), Pq.pure, Pq.spatial), SymbolicHeap((), Qq.pure, Qq.spatial),
               lambda m, xs=xs: m.close(xs))

    def _ctx(self, P, Q) -> PureContext:
        return context_of(P.pure + Q.pure)

    def _ls_start(self, P, Q):
        ctx = self._ctx(P, Q)
        yield from self._ls_start_dir(P, Q, ctx, False)
        yield from self._ls_start_dir(Q, P, ctx, True)

    def _ls_start_dir(self, A, B, ctx, swapped):
        # A ∗ ls(e1,e2) vs B ∗ e1↦e3 ⟹ M ∗ e1↦e3 from A ∗ ls(e3,e2) vs B.
        for i, a in enumerate(A.spatial):
            if not isinstance(a, Ls):
                continue
            for j, b in enumerate(B.spatial):
                if isinstance(b, PointsTo) and ctx.eq(a.start, b.addr):
                    A2 = _replace(A, i, Ls(b.value, a.end))
                    B2 = _drop(B, j)
                    cell = PointsTo(b.addr, b.value)
                    yield _orient(A2, B2, swapped) + (lambda m, c=cell: _add_sp(m, c),)

    def _match(self, P, Q):
        ctx = self._ctx(P, Q)
        for i, a in enumerate(P.spatial):
            for j, b in enumerate(Q.spatial):
                if isinstance(a, PointsTo) and isinstance(b, PointsTo) and ctx.eq(a.addr, b.addr):
                    eq = Eq(a.value, b.value)
                    yield (_drop(P, i).add_pure(eq), _drop(Q, j).add_pure(eq),
                           lambda m, c=a: _add_sp(m, c))
                elif isinstance(a, Dangling) and isinstance(b, Dangling) and ctx.eq(a.addr, b.addr):
                    yield (_drop(P, i), _drop(Q, j), lambda m, c=a: _add_sp(m, c))

    def _ls_end(self, P, Q):
        ctx = self._ctx(P, Q)
        for i, a in enumerate(P.spatial):
            if not isinstance(a, Ls):
                continue
            for j, b in enumerate(Q.spatial):
                if isinstance(b, Ls) and ctx.eq(a.start, b.start):
                    # Ls-End-L: M ∗ ls(e1,e3) from P ∗ ls(e3,e2) vs Q.
                    yield (_replace(P, i, Ls(b.end, a.end)), _drop(Q, j),
                           lambda m, c=Ls(a.start, b.end): _add_sp(m, c))
                    # Ls-End-R: M ∗ ls(e1,e2) from P vs ls(e2,e3) ∗ Q.
                    yield (_drop(P, i), _replace(Q, j, Ls(a.end, b.end)),
                           lambda m, c=Ls(a.start, a.end): _add_sp(m, c))

    def _missing(self, P, Q):
        yield from self._missing_dir(P, Q, False)
        yield from self._missing_dir(Q, P, True)

    def _missing_dir(self, A, B, swapped):
        if not B.has_tru:
            return
        other = B.without_tru()
        for i, a in enumerate(A.spatial):
            if isinstance(a, Tru):
                continue
            if proves_false(SymbolicHeap((), other.pure, other.spatial + (a,))):
                continue
            yield _orient(_drop(A, i), B, swapped) + (lambda m, c=a: _add_sp(m, c),)

    def _emp_ls(self, P, Q):
        for i, a in enumerate(P.spatial):
            if isinstance(a, Ls):
                eq = Eq(a.start, a.end)
                yield (_drop(P, i).add_pure(eq), Q.add_pure(eq), lambda m: m)
        for j, b in enumerate(Q.spatial):
            if isinstance(b, Ls):
                eq = Eq(b.start, b.end)
                yield (P.add_pure(eq), _drop(Q, j).add_pure(eq), lambda m: m)


def _orient(A, B, swapped):
    return (B, A) if swapped else (A, B)


def _drop(h: SymbolicHeap, i: int) -> SymbolicHeap:
    return SymbolicHeap(h.exists, h.pure, h.spatial[:i] + h.spatial[i + 1:])


def _replace(h: SymbolicHeap, i: int, a: Spatial) -> SymbolicHeap:
    return SymbolicHeap(h.exists, h.pure, h.spatial[:i] + (a,) + h.spatial[i + 1:])


def _add_sp(m: SymbolicHeap, a: Spatial) -> SymbolicHeap:
    return SymbolicHeap(m.exists, m.pure, m.spatial + (a,))


def abduce_par(P: SymbolicHeap, Q: SymbolicHeap, cap: int = ABDUCTION_CAP) -> List[SymbolicHeap]:
    """Anti-frames M derivable for ⟨P [M] Q⟩, so that M ⊨ P and M ⊨ Q."""
    return _AbducePar(cap).run(P, Q)


def triab(P: SymbolicHeap, Q: SymbolicHeap, cap: int = ABDUCTION_CAP) -> List[TriabSolution]:
    out: List[TriabSolution] = []
    seen = set()
    for M in abduce_par(P.with_tru(), Q.with_tru(), cap):
        for cand in ((M.without_tru(), M) if M.has_tru else (M,)):
            f1 = infer_frame(cand, P)
            f2 = infer_frame(cand, Q)
            if f1 and f2:
                sol = TriabSolution(cand.canonical(), f1[0], f2[0])
                k = str(sol)
                if k not in seen:
                    seen.add(k)
                    out.append(sol)
                break
    return out


# ------------------------------------------------------------------ biab


@dataclass
class _BState:
    lhs: List[Spatial]
    ctx: PureContext
    rhs: List[Spatial]
    rhs_pure: List[Pure]
    theta: Dict[str, Term]
    m_sp: List[Spatial]
    m_pure: List[Pure]
    skolems: List[str]
    names: Set[str]

    def copy(self) -> "_BState":
        return _BState(list(self.lhs), self.ctx.copy(), list(self.rhs), list(self.rhs_pure),
                       dict(self.theta), list(self.m_sp), list(self.m_pure), list(self.skolems),
                       set(self.names))

    def res(self, t: Term) -> Term:
        m = {L.LVar(k): v for k, v in self.theta.items()}
        for _ in range(len(m) + 1):
            t2 = subst_term(t, m)
            if t2 == t:
                break
            t = t2
        return t

    def res_atom(self, a):
        if isinstance(a, Tru):
            return a
        from .assertions import map_atom
        return map_atom(a, self.res)


class _Biab:
    def __init__(self, delta: SymbolicHeap, Q: SymbolicHeap, cap: int):
        self.cap = cap
        names = delta.all_names() | Q.all_names()
        self.Q = Q.rename_bound(delta.all_names())
        self.uvars = set(self.Q.exists)
        self.delta = delta
        self.results: List[Tuple[List[Spatial], List[Pure], List[Spatial], List[str], Dict]] = []
        st = _BState(list(delta.spatial), context_of(delta.pure, delta.spatial),
                     [a for a in self.Q.spatial if not isinstance(a, Tru)], list(self.Q.pure), {}, [], [], [],
                     names | self.Q.all_names())
        self.absorb = self.Q.has_tru
        self.go(st, 0)

    def unbound(self, st: _BState, t: Term) -> Set[str]:
        return {n for n in term_lvars(st.res(t)) if n in self.uvars and n not in st.theta}

    def go(self, st: _BState, steps: int) -> None:
        if len(self.results) >= 64 or steps > 40:
            return
        if not st.ctx.ok:
            return
        self.bind_pure(st)
        if not st.rhs:
            self.finish(st)
            return
        idx = None
        for i, a in enumerate(st.rhs):
            head = a.start if isinstance(a, Ls) else a.addr
            if not self.unbound(st, head):
                idx = i
                break
        if idx is None:
            a = st.rhs[0]
            head = st.res(a.start if isinstance(a, Ls) else a.addr)
            rest = st.rhs[1:]
            if isinstance(head, L.LVar):
                for b in st.lhs:
                    if type(b) is type(a) or (isinstance(a, Ls) and isinstance(b, PointsTo)):
                        bh = b.start if isinstance(b, Ls) else b.addr
                        s2 = st.copy()
                        s2.theta[head.name] = bh
                        self.go(s2, steps + 1)
            # Missing with an existential address.
            s2 = st.copy()
            s2.rhs = rest
            s2.m_sp.append(st.res_atom(a))
            if self.consistent(s2):
                self.go(s2, steps + 1)
            return
        a = st.rhs[idx]
        rest = st.rhs[:idx] + st.rhs[idx + 1:]
        ctx = st.ctx
        if isinstance(a, (PointsTo, Dangling)):
            addr = st.res(a.addr)
            for j, b in enumerate(st.lhs):
                if type(b) is type(a) and ctx.eq(b.addr, addr):
                    s2 = st.copy()
                    s2.lhs.pop(j)
                    s2.rhs = rest
                    if isinstance(a, PointsTo):
                        self.unify(s2, a.value, b.value)
                    self.go(s2, steps + 1)
                    return
            for j, b in enumerate(st.lhs):
                # Match after abducing that a logical address aliases an existing cell.
                if type(b) is type(a) and not ctx.neq(b.addr, addr) and \
                        (isinstance(addr, L.LVar) or isinstance(b.addr, L.LVar)):
                    s2 = st.copy()
                    s2.lhs.pop(j)
                    s2.rhs = rest
                    s2.m_pure.append(Eq(b.addr, addr))
                    s2.ctx.add_eq(b.addr, addr)
                    if isinstance(a, PointsTo):
                        self.unify(s2, a.value, b.value)
                    if self.consistent(s2):
                        self.go(s2, steps + 1)
            if isinstance(a, PointsTo):
                for j, b in enumerate(st.lhs):
                    if isinstance(b, Ls) and ctx.eq(b.start, addr):
                        # ls-head: abduce that the segment is nonempty and unfold it.
                        s2 = st.copy()
                        z = fresh_name("_Z", s2.names)
                        s2.names.add(z)
                        s2.skolems.append(z)
                        s2.lhs.pop(j)
                        s2.lhs += [PointsTo(b.start, L.LVar(z)), Ls(L.LVar(z), b.end)]
                        if not ctx.neq(b.start, b.end):
                            s2.m_pure.append(Neq(b.start, b.end))
                            s2.ctx.add_neq(b.start, b.end)
                        self.go(s2, steps + 1)
            s2 = st.copy()
            s2.rhs = rest
            s2.m_sp.append(st.res_atom(a))
            if self.consistent(s2):
                self.go(s2, steps + 1)
            return
        if isinstance(a, Ls):
            start, end = st.res(a.start), st.res(a.end)
            if self.unbound(st, end) and isinstance(end, L.LVar):
                s2 = st.copy()
                s2.theta[end.name] = start
                s2.rhs = rest
                self.go(s2, steps + 1)
            elif ctx.eq(start, end):
                s2 = st.copy()
                s2.rhs = rest
                self.go(s2, steps + 1)
                return
            for j, b in enumerate(st.lhs):
                if isinstance(b, PointsTo) and ctx.eq(b.addr, start):
                    s2 = st.copy()
                    s2.lhs.pop(j)
                    s2.rhs = rest + [Ls(b.value, a.end)]
                    self.go(s2, steps + 1)
                elif isinstance(b, Ls) and ctx.eq(b.start, start):
                    s2 = st.copy()
                    s2.lhs.pop(j)
                    s2.rhs = rest + [Ls(b.end, a.end)]
                    self.go(s2, steps + 1)
            if not self.unbound(st, end) and not ctx.neq(start, end):
                s2 = st.copy()
                s2.rhs = rest
                s2.m_pure.append(Eq(start, end))
                s2.ctx.add_eq(start, end)
                if self.consistent(s2):
                    self.go(s2, steps + 1)
            s2 = st.copy()
            s2.rhs = rest
            s2.m_sp.append(st.res_atom(a))
            if self.consistent(s2):
                self.go(s2, steps + 1)

    def unify(self, st: _BState, pat: Term, val: Term) -> None:
        p = st.res(pat)
        if isinstance(p, L.LVar) and p.name in self.uvars and p.name not in st.theta:
            st.theta[p.name] = val
        elif not st.ctx.eq(p, val):
            st.rhs_pure.append(Eq(p, val))

    def bind_pure(self, st: _BState) -> None:
        changed = True
        while changed:
            changed = False
            for a in st.rhs_pure:
                if isinstance(a, Eq):
                    l, r = st.res(a.left), st.res(a.right)
                    for x, y in ((l, r), (r, l)):
                        if isinstance(x, L.LVar) and x.name in self.uvars and x.name not in st.theta \
                                and not self.unbound(st, y) and x not in (y,):
                            st.theta[x.name] = y
                            changed = True
                            break

    def consistent(self, st: _BState) -> bool:
        h = SymbolicHeap((), tuple(self.delta.pure) + tuple(st.m_pure),
                         tuple(st.lhs) + tuple(st.m_sp))
        return not proves_false(h)

    def finish(self, st: _BState) -> None:
        for a in st.rhs_pure:
            a2 = type(a)(st.res(a.left), st.res(a.right))
            if st.ctx.proves(a2):
                continue
            if self.unbound(st, a2.left) or self.unbound(st, a2.right):
                if isinstance(a2, Neq):
                    continue
                return
            st.m_pure.append(a2)
            st.ctx.add(a2)
        if not self.consistent(st) or not st.ctx.ok:
            return
        self.results.append((st.lhs, st.m_pure, st.m_sp, st.skolems, st.theta))

    def solutions(self) -> List[BiabSolution]:
        out: List[BiabSolution] = []
        seen = set()
        for lhs, m_pure, m_sp, skolems, theta in self.results:
            ex = set()
            for a in list(m_sp) + list(m_pure):
                ex |= {v.name for v in atom_vars(a) if isinstance(v, L.LVar) and v.name in self.uvars}
            M = SymbolicHeap(tuple(sorted(ex)), tuple(m_pure), tuple(m_sp))
            F = SymbolicHeap((), self.delta.pure, tuple(a for a in lhs))
            F = F.close(skolems)
            if self.absorb:
                F = SymbolicHeap((), self.delta.pure, ())
            key = (str(M.canonical()), str(F.canonical()))
            if key in seen:
                continue
            seen.add(key)
            Mc = M.canonical()
            if proves_false(SymbolicHeap((), self.delta.pure + Mc.pure, self.delta.spatial + Mc.spatial)):
                continue
            if entails(self.delta.star(Mc), self.Q.star(F)):
                out.append(BiabSolution(Mc, F.canonical()))
        out.sort(key=lambda s: (len(s.anti_frame.spatial), len(s.anti_frame.pure), str(s.anti_frame)))
        return out[:self.cap]


def biab(delta: SymbolicHeap, Q: SymbolicHeap, cap: int = ABDUCTION_CAP) -> List[BiabSolution]:
    """Pairs (M, F) with Δ ∗ M ⊢ Q ∗ F; Δ must be quantifier-free."""
    if delta.exists:
        raise ValueError("biab expects a quantifier-free left-hand side")
    return _Biab(delta, Q, cap).solutions()
