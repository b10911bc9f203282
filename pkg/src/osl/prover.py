"""Inconsistency, entailment and frame inference for symbolic heaps."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from . import lang as L
from .assertions import (EMP, Dangling, Eq, Ls, Neq, PointsTo, Pure, Spatial, SymbolicHeap, Term, Tru,
                         atom_terms, atom_vars, fold, fresh_name, map_atom, subst_term, term_key,
                         term_lvars, term_vars)

ROLL_DEPTH = 3


class PureContext:
    """Union-find over terms plus disequalities between classes."""

    def __init__(self):
        self.parent: Dict[Term, Term] = {}
        self.diseq: Set[Tuple[Term, Term]] = set()
        self.ok = True

    def copy(self) -> "PureContext":
        c = PureContext()
        c.parent = dict(self.parent)
        c.diseq = set(self.diseq)
        c.ok = self.ok
        return c

    def find(self, t: Term) -> Term:
        t = fold(t)
        path = []
        while t in self.parent and self.parent[t] != t:
            path.append(t)
            t = self.parent[t]
        for p in path:
            self.parent[p] = t
        return t

    def _const_of(self, r: Term) -> Optional[Term]:
        return r if isinstance(r, L.Const) else None

    def add_eq(self, a: Term, b: Term) -> "PureContext":
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return self
        if isinstance(ra, L.Const) and isinstance(rb, L.Const):
            self.ok = False
            return self
        # Constants become representatives.
        if isinstance(ra, L.Const) or (not isinstance(rb, L.Const) and term_key(ra) < term_key(rb)):
            ra, rb = rb, ra
        self.parent[ra] = rb
        self.parent.setdefault(rb, rb)
        new = set()
        for x, y in self.diseq:
            x2, y2 = self.find(x), self.find(y)
            if x2 == y2:
                self.ok = False
            new.add(_pair(x2, y2))
        self.diseq = new
        return self

    def add_neq(self, a: Term, b: Term) -> "PureContext":
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            self.ok = False
        elif not (isinstance(ra, L.Const) and isinstance(rb, L.Const)):
            self.diseq.add(_pair(ra, rb))
        return self

    def add(self, atom: Pure) -> "PureContext":
        return self.add_eq(atom.left, atom.right) if isinstance(atom, Eq) else self.add_neq(atom.left, atom.right)

    def eq(self, a: Term, b: Term) -> bool:
        if not self.ok:
            return True
        return self.find(a) == self.find(b)

    def neq(self, a: Term, b: Term) -> bool:
        if not self.ok:
            return True
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if isinstance(ra, L.Const) and isinstance(rb, L.Const):
            return True
        return _pair(ra, rb) in self.diseq

    def proves(self, atom: Pure) -> bool:
        return self.eq(atom.left, atom.right) if isinstance(atom, Eq) else self.neq(atom.left, atom.right)

    def class_of(self, t: Term) -> List[Term]:
        r = self.find(t)
        out = {t, r}
        for k in list(self.parent):
            if self.find(k) == r:
                out.add(k)
        return sorted(out, key=term_key)


def _pair(a: Term, b: Term) -> Tuple[Term, Term]:
    return (a, b) if term_key(a) <= term_key(b) else (b, a)


def _bad_addr(t: Term) -> bool:
    return isinstance(t, L.Const) and not (isinstance(t.value, int) and t.value >= 1)


def context_of(pure: Iterable[Pure], spatial: Iterable[Spatial] = ()) -> PureContext:
    """Pure closure plus facts implied by the spatial part (cells are non-null and distinct)."""
    ctx = PureContext()
    for a in pure:
        ctx.add(a)
    cells = [a.addr for a in spatial if isinstance(a, (PointsTo, Dangling))]
    for i, x in enumerate(cells):
        ctx.add_neq(x, L.Const(0))
        for y in cells[:i]:
            ctx.add_neq(x, y)
    return ctx


def proves_false(P: SymbolicHeap) -> bool:
    ctx = PureContext()
    for a in P.pure:
        ctx.add(a)
    if not ctx.ok:
        return True
    cells = [a.addr for a in P.spatial if isinstance(a, (PointsTo, Dangling))]
    for i, x in enumerate(cells):
        if _bad_addr(ctx.find(x)) or ctx.eq(x, L.Const(0)):
            return True
        for y in cells[:i]:
            if ctx.eq(x, y):
                return True
    for a in P.spatial:
        if isinstance(a, Ls) and ctx.neq(a.start, a.end):
            # Nonempty segment: its head is a cell.
            if ctx.eq(a.start, L.Const(0)) or _bad_addr(ctx.find(a.start)):
                return True
            if any(ctx.eq(a.start, c) for c in cells):
                return True
    return False


# ----------------------------------------------------------------- search


@dataclass
class _Goal:
    lhs: List[Spatial]
    ctx: PureContext
    rhs: List[Spatial]
    rhs_pure: List[Pure]
    theta: Dict[str, Term]
    uvars: FrozenSet[str]
    depth: int
    names: Set[str]

    def copy(self, **kw) -> "_Goal":
        g = _Goal(list(self.lhs), self.ctx.copy(), list(self.rhs), list(self.rhs_pure), dict(self.theta),
                  self.uvars, self.depth, set(self.names))
        for k, v in kw.items():
            setattr(g, k, v)
        return g

    def res(self, t: Term) -> Term:
        m = {L.LVar(k): v for k, v in self.theta.items()}
        for _ in range(len(m) + 1):
            t2 = subst_term(t, m)
            if t2 == t:
                return t
            t = t2
        return t

    def unbound(self, t: Term) -> Set[str]:
        return {n for n in term_lvars(self.res(t)) if n in self.uvars and n not in self.theta}

    def fresh(self, base: str = "Z") -> L.LVar:
        n = fresh_name("_" + base, self.names)
        self.names.add(n)
        return L.LVar(n)


Leftover = Tuple[Tuple[Spatial, ...], Tuple[Pure, ...]]


def _solve(g: _Goal, absorb: bool) -> List[Leftover]:
    """Subtract the right-hand spatial part from the left; returns possible leftovers.

    Each leftover is (remaining lhs atoms, pure atoms from case splits). An
    empty list means no proof. With `absorb`, leftovers are reported empty.
    """
    if not g.ctx.ok:
        return [((), ())]
    # Bind unification variables from pure equalities.
    changed = True
    while changed:
        changed = False
        for a in g.rhs_pure:
            if isinstance(a, Eq):
                l, r = g.res(a.left), g.res(a.right)
                for x, y in ((l, r), (r, l)):
                    if isinstance(x, L.LVar) and x.name in g.uvars and x.name not in g.theta \
                            and not g.unbound(y):
                        g.theta[x.name] = y
                        changed = True
                        break
    if not g.rhs:
        return _finish(g, absorb)
    # Pick the first rhs atom with a bound address.
    for i, a in enumerate(g.rhs):
        if isinstance(a, Tru):
            rest = g.rhs[:i] + g.rhs[i + 1:]
            return _solve(g.copy(rhs=rest), True)
    for i, a in enumerate(g.rhs):
        head = a.start if isinstance(a, Ls) else a.addr
        if g.unbound(head):
            continue
        rest = g.rhs[:i] + g.rhs[i + 1:]
        return _step(g, a, rest, absorb)
    # All addresses unbound: unify the first with each lhs cell address.
    a = g.rhs[0]
    head = a.start if isinstance(a, Ls) else a.addr
    head = g.res(head)
    out: List[Leftover] = []
    if isinstance(head, L.LVar):
        for b in g.lhs:
            if isinstance(b, Tru):
                continue
            bh = b.start if isinstance(b, Ls) else b.addr
            g2 = g.copy()
            g2.theta[head.name] = bh
            out.extend(_solve(g2, absorb))
        if isinstance(a, Ls):
            # Empty segment choice: start equals end.
            end = g.res(a.end)
            if not g.unbound(end):
                g2 = g.copy()
                g2.theta[head.name] = end
                out.extend(_solve(g2, absorb))
    return _dedup(out)


def _finish(g: _Goal, absorb: bool) -> List[Leftover]:
    for a in g.rhs_pure:
        a2 = type(a)(g.res(a.left), g.res(a.right))
        if g.unbound(a2.left) or g.unbound(a2.right):
            return []
        if not g.ctx.proves(a2):
            return []
    if absorb:
        return [((), ())]
    return [(tuple(g.lhs), ())]


def _dedup(xs: List[Leftover]) -> List[Leftover]:
    seen = {}
    for x in xs:
        k = (tuple(sorted(map(str, x[0]))), tuple(sorted(map(str, x[1]))))
        seen.setdefault(k, x)
    return list(seen.values())


def _unify_value(g: _Goal, pat: Term, val: Term) -> Optional[_Goal]:
    p = g.res(pat)
    if isinstance(p, L.LVar) and p.name in g.uvars and p.name not in g.theta:
        g2 = g.copy()
        g2.theta[p.name] = val
        return g2
    if g.unbound(p):
        return None
    if g.ctx.eq(p, val):
        return g.copy()
    return None


def _step(g: _Goal, a: Spatial, rest: List[Spatial], absorb: bool) -> List[Leftover]:
    ctx = g.ctx
    out: List[Leftover] = []
    if isinstance(a, (PointsTo, Dangling)):
        addr = g.res(a.addr)
        for j, b in enumerate(g.lhs):
            if type(b) is type(a) and ctx.eq(b.addr, addr):
                lhs = g.lhs[:j] + g.lhs[j + 1:]
                if isinstance(a, PointsTo):
                    g2 = _unify_value(g, a.value, b.value)
                    if g2 is None:
                        # Values must agree; record the obligation.
                        g2 = g.copy()
                        g2.rhs_pure = g2.rhs_pure + [Eq(a.value, b.value)]
                else:
                    g2 = g.copy()
                    g2.rhs_pure = list(g2.rhs_pure)
                g2.lhs = lhs
                g2.rhs = rest
                return _solve(g2, absorb)
        # Unfold a left segment starting at this address.
        if isinstance(a, PointsTo):
            for j, b in enumerate(g.lhs):
                if isinstance(b, Ls) and ctx.eq(b.start, addr):
                    return _split_ls(g, j, absorb)
        return []
    if isinstance(a, Ls):
        start = g.res(a.start)
        end = g.res(a.end)
        if g.unbound(end):
            # Try binding the end to the start (empty) or follow cells.
            e = end
            if isinstance(e, L.LVar):
                g2 = g.copy()
                g2.theta[e.name] = start
                g2.rhs = rest
                out.extend(_solve(g2, absorb))
        elif ctx.eq(start, end):
            g2 = g.copy(rhs=rest)
            out.extend(_solve(g2, absorb))
        for j, b in enumerate(g.lhs):
            if isinstance(b, PointsTo) and ctx.eq(b.addr, start):
                g2 = g.copy()
                g2.lhs = g.lhs[:j] + g.lhs[j + 1:]
                g2.rhs = rest + [Ls(b.value, a.end)]
                out.extend(_solve(g2, absorb))
            elif isinstance(b, Ls) and ctx.eq(b.start, start):
                g2 = g.copy()
                g2.lhs = g.lhs[:j] + g.lhs[j + 1:]
                g2.rhs = rest + [Ls(b.end, a.end)]
                out.extend(_solve(g2, absorb))
        return _dedup(out)
    return []


def _split_ls(g: _Goal, j: int, absorb: bool) -> List[Leftover]:
    """Case split a left segment ls(a,b): empty (a=b) or a↦Z ∗ ls(Z,b)."""
    if g.depth <= 0:
        return []
    b = g.lhs[j]
    rest = g.lhs[:j] + g.lhs[j + 1:]
    nonempty = g.copy(depth=g.depth - 1)
    z = nonempty.fresh()
    nonempty.lhs = rest + [PointsTo(b.start, z), Ls(z, b.end)]
    nonempty.ctx.add_neq(b.start, L.Const(0))
    for c in rest:
        if isinstance(c, (PointsTo, Dangling)):
            nonempty.ctx.add_neq(b.start, c.addr)
    if g.ctx.neq(b.start, b.end):
        return _solve(nonempty, absorb)
    empty = g.copy(depth=g.depth - 1)
    empty.lhs = rest
    empty.ctx.add_eq(b.start, b.end)
    r1 = _solve(empty, absorb)
    if not r1:
        return []
    nonempty.ctx.add_neq(b.start, b.end)
    r2 = _solve(nonempty, absorb)
    if not r2:
        return []
    # Both branches must agree on a leftover.
    k2 = {_lkey(x) for x in r2}
    common = [x for x in r1 if _lkey(x) in k2]
    return common


def _lkey(x: Leftover):
    return (tuple(sorted(map(str, x[0]))), tuple(sorted(map(str, x[1]))))


def _prepare(P: SymbolicHeap, Q: SymbolicHeap, depth: int):
    names = set(P.all_names()) | set(Q.all_names())
    Pq = P.rename_bound(Q.all_names())
    Qq = Q.rename_bound(Pq.all_names())
    names |= Pq.all_names() | Qq.all_names()
    ctx = context_of(Pq.pure, Pq.spatial)
    g = _Goal(lhs=list(Pq.spatial), ctx=ctx, rhs=list(Qq.spatial), rhs_pure=list(Qq.pure), theta={},
              uvars=frozenset(Qq.exists), depth=depth, names=names)
    return g, Pq, Qq


def entails(P: SymbolicHeap, Q: SymbolicHeap, depth: int = ROLL_DEPTH) -> bool:
    if proves_false(P):
        return True
    g, _, Qq = _prepare(P, Q, depth)
    res = _solve(g, Qq.has_tru)
    return any(not x[0] for x in res)


def infer_frame(P: SymbolicHeap, Q: SymbolicHeap, depth: int = ROLL_DEPTH) -> List[SymbolicHeap]:
    """Frames F with P ⊢ Q ∗ F, each re-checked by `entails`."""
    if Q.has_tru:
        return [SymbolicHeap()] if entails(P, Q, depth) else []
    g, Pq, Qq = _prepare(P, Q, depth)
    res = _solve(g, False)
    out: List[SymbolicHeap] = []
    seen = set()
    keep_pure = tuple(a for a in Pq.pure if not any(isinstance(v, L.LVar) for v in atom_vars(a)))
    for left, _ in res:
        lv = set()
        for a in left:
            lv |= {v.name for v in atom_vars(a) if isinstance(v, L.LVar)}
        F = SymbolicHeap(tuple(sorted(lv & set(Pq.exists))), keep_pure, tuple(left)).canonical()
        k = str(F)
        if k in seen:
            continue
        seen.add(k)
        if entails(P, Q.star(F), depth):
            out.append(F)
    return sorted(out, key=lambda f: (len(f.spatial), str(f)))
