"""Symbolic heaps, outcome assertions, their parsers and semantic checkers."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from . import lang as L
from .algebra import BOT, OutcomeAlgebra, TaggedState, Weighting, get_algebra
from .concrete import eval_expr

Term = L.Expr


class BudgetExceeded(Exception):
    pass


# ------------------------------------------------------------------- terms


def term_vars(t: Term) -> Set[Union[L.Var, L.LVar]]:
    if isinstance(t, (L.Var, L.LVar)):
        return {t}
    if isinstance(t, L.BinOp):
        return term_vars(t.left) | term_vars(t.right)
    if isinstance(t, L.Not):
        return term_vars(t.arg)
    return set()


def term_lvars(t: Term) -> Set[str]:
    return {v.name for v in term_vars(t) if isinstance(v, L.LVar)}


def fold(t: Term) -> Term:
    """Constant-fold ground compound terms; leave others structural."""
    if isinstance(t, (L.BinOp, L.Not)) and not term_vars(t):
        v = eval_expr(t, {})
        return L.Const(v)
    if isinstance(t, L.Const) and isinstance(t.value, Fraction) and t.value.denominator == 1:
        return L.Const(int(t.value))
    return t


def subst_term(t: Term, m: Mapping) -> Term:
    if isinstance(t, (L.Var, L.LVar)):
        return m.get(t, t)
    if isinstance(t, L.BinOp):
        return fold(L.BinOp(t.op, subst_term(t.left, m), subst_term(t.right, m)))
    if isinstance(t, L.Not):
        return fold(L.Not(subst_term(t.arg, m)))
    return t


def show_term(t: Term) -> str:
    return L.show_expr(t)


def term_key(t: Term) -> Tuple:
    """Total order on terms: constants, then program variables, then logical."""
    if isinstance(t, L.Const):
        return (0, Fraction(t.value), "")
    if isinstance(t, L.Var):
        return (1, 0, t.name)
    if isinstance(t, L.LVar):
        return (3 if t.name.startswith("_") else 2, 0, t.name)
    return (4, 0, show_term(t))


# ------------------------------------------------------------------- atoms


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{show_term(self.left)} = {show_term(self.right)}"


@dataclass(frozen=True)
class Neq:
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{show_term(self.left)} != {show_term(self.right)}"


@dataclass(frozen=True)
class PointsTo:
    addr: Term
    value: Term

    def __str__(self) -> str:
        return f"{show_term(self.addr)} |-> {show_term(self.value)}"


@dataclass(frozen=True)
class Dangling:
    """e ↦ ⊥: the cell was deallocated."""

    addr: Term

    def __str__(self) -> str:
        return f"{show_term(self.addr)} !|->"


@dataclass(frozen=True)
class Ls:
    start: Term
    end: Term

    def __str__(self) -> str:
        return f"ls({show_term(self.start)}, {show_term(self.end)})"


@dataclass(frozen=True)
class Tru:
    def __str__(self) -> str:
        return "tru"


Pure = Union[Eq, Neq]
Spatial = Union[PointsTo, Dangling, Ls, Tru]
Atom = Union[Pure, Spatial]


def atom_terms(a: Atom) -> Tuple[Term, ...]:
    if isinstance(a, (Eq, Neq)):
        return (a.left, a.right)
    if isinstance(a, PointsTo):
        return (a.addr, a.value)
    if isinstance(a, Dangling):
        return (a.addr,)
    if isinstance(a, Ls):
        return (a.start, a.end)
    return ()


def map_atom(a: Atom, f) -> Atom:
    if isinstance(a, Tru):
        return a
    return type(a)(*[f(t) for t in atom_terms(a)])


def atom_vars(a: Atom) -> Set:
    out: Set = set()
    for t in atom_terms(a):
        out |= term_vars(t)
    return out


def orient(a: Pure) -> Pure:
    l, r = a.left, a.right
    if term_key(l) > term_key(r):
        l, r = r, l
    return type(a)(l, r)


# ------------------------------------------------------------- symbolic heaps


@dataclass(frozen=True)
class SymbolicHeap:
    """∃exists. pure ∧ spatial; an empty spatial tuple means emp."""

    exists: Tuple[str, ...] = ()
    pure: Tuple[Pure, ...] = ()
    spatial: Tuple[Spatial, ...] = ()

    # -- structure
    def atoms(self) -> Tuple[Atom, ...]:
        return self.pure + self.spatial

    def free_vars(self) -> Set:
        out: Set = set()
        for a in self.atoms():
            out |= atom_vars(a)
        return {v for v in out if not (isinstance(v, L.LVar) and v.name in self.exists)}

    def free_lvars(self) -> Set[str]:
        return {v.name for v in self.free_vars() if isinstance(v, L.LVar)}

    def all_names(self) -> Set[str]:
        out = set(self.exists)
        for a in self.atoms():
            out |= {v.name for v in atom_vars(a)}
        return out

    def program_vars(self) -> Set[str]:
        return {v.name for v in self.free_vars() if isinstance(v, L.Var)}

    @property
    def has_tru(self) -> bool:
        return any(isinstance(a, Tru) for a in self.spatial)

    @property
    def is_emp(self) -> bool:
        return not self.spatial

    def without_tru(self) -> "SymbolicHeap":
        return SymbolicHeap(self.exists, self.pure, tuple(a for a in self.spatial if not isinstance(a, Tru)))

    def with_tru(self) -> "SymbolicHeap":
        return self if self.has_tru else SymbolicHeap(self.exists, self.pure, self.spatial + (Tru(),))

    def add_pure(self, *atoms: Pure) -> "SymbolicHeap":
        return self.star(SymbolicHeap((), tuple(atoms), ()))

    def add_spatial(self, *atoms: Spatial) -> "SymbolicHeap":
        return self.star(SymbolicHeap((), (), tuple(atoms)))

    def quantifier_free(self) -> bool:
        return not self.exists

    # -- binding operations
    def rename_bound(self, avoid: Set[str]) -> "SymbolicHeap":
        """Alpha-rename existentials that clash with `avoid`."""
        clash = [x for x in self.exists if x in avoid]
        if not clash:
            return self
        used = set(avoid) | self.all_names()
        m = {}
        for x in clash:
            n = fresh_name(x, used)
            used.add(n)
            m[L.LVar(x)] = L.LVar(n)
        body = SymbolicHeap((), self.pure, self.spatial).subst(m)
        ex = tuple(m[L.LVar(x)].name if L.LVar(x) in m else x for x in self.exists)
        return SymbolicHeap(ex, body.pure, body.spatial)

    def subst(self, m: Mapping) -> "SymbolicHeap":
        """Capture-avoiding substitution of free variables."""
        m = {k: v for k, v in m.items() if not (isinstance(k, L.LVar) and k.name in self.exists)}
        if not m:
            return self
        incoming: Set[str] = set()
        for v in m.values():
            incoming |= {x.name for x in term_vars(v)}
        h = self.rename_bound(incoming) if self.exists else self
        f = lambda t: subst_term(t, m)
        return SymbolicHeap(h.exists, tuple(map_atom(a, f) for a in h.pure),
                            tuple(map_atom(a, f) for a in h.spatial))

    def star(self, other: "SymbolicHeap") -> "SymbolicHeap":
        a = self.rename_bound(other.all_names())
        b = other.rename_bound(a.all_names())
        return SymbolicHeap(a.exists + b.exists, a.pure + b.pure, a.spatial + b.spatial)

    def close(self, names: Iterable[str]) -> "SymbolicHeap":
        """Existentially quantify the given logical variables (if free)."""
        fl = self.free_lvars()
        add = tuple(n for n in sorted(set(names)) if n in fl and n not in self.exists)
        return SymbolicHeap(self.exists + add, self.pure, self.spatial)

    def open(self, used: Set[str]) -> Tuple["SymbolicHeap", Dict[str, str]]:
        """Strip existentials, renaming them away from `used`; returns the map."""
        h = self.rename_bound(used)
        return SymbolicHeap((), h.pure, h.spatial), {x: x for x in h.exists}

    def canonical(self) -> "SymbolicHeap":
        pure = []
        for a in self.pure:
            a = orient(type(a)(fold(a.left), fold(a.right)))
            if isinstance(a, Eq) and a.left == a.right:
                continue
            pure.append(a)
        spatial = [map_atom(a, fold) for a in self.spatial]
        if any(isinstance(a, Tru) for a in spatial):
            spatial = [a for a in spatial if not isinstance(a, Tru)] + [Tru()]
        used = set()
        for a in pure + spatial:
            used |= {v.name for v in atom_vars(a)}
        ex = tuple(sorted(x for x in set(self.exists) if x in used))
        return SymbolicHeap(ex, tuple(sorted(set(pure), key=str)),
                            tuple(sorted(spatial, key=lambda a: (isinstance(a, Tru), str(a)))))

    def __str__(self) -> str:
        return show_heap(self)


EMP = SymbolicHeap()
TRU = SymbolicHeap((), (), (Tru(),))


def fresh_name(base: str, used: Set[str]) -> str:
    stem = base.rstrip("0123456789'") or "X"
    i = 1
    while f"{stem}{i}" in used:
        i += 1
    return f"{stem}{i}"


def show_heap(h: SymbolicHeap) -> str:
    parts = [str(a) for a in h.pure] + [str(a) for a in h.spatial]
    body = " * ".join(parts) if parts else "emp"
    if h.pure and not h.spatial:
        body += " * emp"
    if h.exists:
        return f"exists {', '.join(h.exists)}. {body}"
    return body


def heap(*atoms: Atom, exists: Iterable[str] = ()) -> SymbolicHeap:
    return SymbolicHeap(tuple(exists), tuple(a for a in atoms if isinstance(a, (Eq, Neq))),
                        tuple(a for a in atoms if not isinstance(a, (Eq, Neq))))


# ---------------------------------------------------------- outcome assertions


@dataclass(frozen=True)
class Top:
    def __str__(self) -> str:
        return "top"


@dataclass(frozen=True)
class Or:
    left: "Outcome"
    right: "Outcome"

    def __str__(self) -> str:
        return f"{_paren(self.left)} \\/ {_paren(self.right)}"


@dataclass(frozen=True)
class OPlus:
    left: "Outcome"
    right: "Outcome"

    def __str__(self) -> str:
        return f"{_paren(self.left)} (+) {_paren(self.right)}"


@dataclass(frozen=True)
class Weighted:
    body: "Outcome"
    weight: Fraction

    def __str__(self) -> str:
        return f"({self.body})_{{{L.fmt_number(Fraction(self.weight))}}}"


@dataclass(frozen=True)
class Basic:
    tag: str
    heap: SymbolicHeap
    # Variables the producing path may have modified; None means unknown.
    mods: Optional[FrozenSet[str]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.tag not in ("ok", "er"):
            raise ValueError(self.tag)

    def __str__(self) -> str:
        return f"{self.tag}: {self.heap}"


Outcome = Union[Top, Or, OPlus, Weighted, Basic]


def _paren(p: Outcome) -> str:
    return str(p) if isinstance(p, (Top, Weighted)) else f"({p})"


def oplus_p(p, left: Outcome, right: Outcome) -> Outcome:
    """Probabilistic outcome choice: (left)_p ⊕ (right)_{1-p}."""
    p = Fraction(p)
    return OPlus(Weighted(left, p), Weighted(right, 1 - p))


def osep(phi: Outcome, F: SymbolicHeap) -> Outcome:
    if isinstance(phi, Top):
        return phi
    if isinstance(phi, Or):
        return Or(osep(phi.left, F), osep(phi.right, F))
    if isinstance(phi, OPlus):
        return OPlus(osep(phi.left, F), osep(phi.right, F))
    if isinstance(phi, Weighted):
        return Weighted(osep(phi.body, F), phi.weight)
    return Basic(phi.tag, phi.heap.star(F), phi.mods)


def map_basic(phi: Outcome, f) -> Outcome:
    if isinstance(phi, Top):
        return phi
    if isinstance(phi, Or):
        return Or(map_basic(phi.left, f), map_basic(phi.right, f))
    if isinstance(phi, OPlus):
        return OPlus(map_basic(phi.left, f), map_basic(phi.right, f))
    if isinstance(phi, Weighted):
        return Weighted(map_basic(phi.body, f), phi.weight)
    r = f(phi)
    if isinstance(r, Basic) and r.mods is None and phi.mods is not None:
        r = Basic(r.tag, r.heap, phi.mods)
    return r


def basics(phi: Outcome) -> Iterator[Basic]:
    if isinstance(phi, Basic):
        yield phi
    elif isinstance(phi, (Or, OPlus)):
        yield from basics(phi.left)
        yield from basics(phi.right)
    elif isinstance(phi, Weighted):
        yield from basics(phi.body)


def substitute(x, m: Mapping):
    """Capture-avoiding substitution on a symbolic heap or outcome assertion."""
    if isinstance(x, SymbolicHeap):
        return x.subst(m)
    return map_basic(x, lambda b: Basic(b.tag, b.heap.subst(m)))


def outcome_free_lvars(phi: Outcome) -> Set[str]:
    out: Set[str] = set()
    for b in basics(phi):
        out |= b.heap.free_lvars()
    return out


def outcome_names(phi: Outcome) -> Set[str]:
    out: Set[str] = set()
    for b in basics(phi):
        out |= b.heap.all_names()
    return out


def canonical_outcome(phi: Outcome) -> Outcome:
    return map_basic(phi, lambda b: Basic(b.tag, b.heap.canonical()))


class Session:
    """Fresh logical-variable supply for one analysis."""

    def __init__(self, prefix: str = "X"):
        self.prefix = prefix
        self.counter = 0
        self.reserved: Set[str] = set()

    def reserve(self, names: Iterable[str]) -> None:
        self.reserved.update(names)

    def fresh(self, hint: Optional[str] = None) -> str:
        while True:
            name = f"{self.prefix}{self.counter}"
            self.counter += 1
            if name not in self.reserved:
                self.reserved.add(name)
                return name

    def fresh_lvar(self) -> L.LVar:
        return L.LVar(self.fresh())


def fresh_lvar(session: Session) -> L.LVar:
    return session.fresh_lvar()


# ---------------------------------------------------------------- parsing


def _is_lvar_name(s: str) -> bool:
    return s[0].isupper() or (s[0] == "_" and len(s) > 1)


class _AssertionParser:
    def __init__(self, text: str):
        self.ts = L.TokenStream(text.replace("\n", " "))
        self.anon = 0
        self.names: Set[str] = set()

    def anon_var(self) -> L.LVar:
        while True:
            self.anon += 1
            n = f"_A{self.anon}"
            if n not in self.names:
                return L.LVar(n)

    def term(self) -> Term:
        ts = self.ts
        t = L._add(ts, True)
        return fold(t)

    def heap(self) -> SymbolicHeap:
        ts = self.ts
        exists: List[str] = []
        if ts.at("exists"):
            ts.next()
            exists.append(ts.next().text)
            while ts.accept(","):
                exists.append(ts.next().text)
            ts.expect(".")
        pure: List[Pure] = []
        spatial: List[Spatial] = []
        anon: List[str] = []
        while True:
            self.atom(pure, spatial, anon)
            if ts.accept("*") or ts.accept("&&") or ts.accept("/\\"):
                continue
            break
        return SymbolicHeap(tuple(exists) + tuple(anon), tuple(pure), tuple(spatial))

    def atom(self, pure, spatial, anon) -> None:
        ts = self.ts
        t = ts.peek()
        if t.kind == "id" and t.text == "emp":
            ts.next()
            return
        if t.kind == "id" and t.text in ("tru", "true"):
            ts.next()
            spatial.append(Tru())
            return
        if t.kind == "id" and t.text == "ls" and ts.peek(1).text == "(":
            ts.next()
            ts.expect("(")
            a = self.term()
            ts.expect(",")
            b = self.term()
            ts.expect(")")
            spatial.append(Ls(a, b))
            return
        if t.kind == "op" and t.text == "(" and not self._paren_is_term():
            ts.next()
            inner = self.heap()
            ts.expect(")")
            if inner.exists:
                raise L.ParseError("existentials inside parentheses are not supported", t.line, t.col)
            pure.extend(inner.pure)
            spatial.extend(inner.spatial)
            return
        a = self.term()
        if ts.accept("|->"):
            if ts.accept("_") or ts.accept("-"):
                v = self.anon_var()
                anon.append(v.name)
                spatial.append(PointsTo(a, v))
            else:
                spatial.append(PointsTo(a, self.term()))
            return
        if ts.accept("!|->"):
            spatial.append(Dangling(a))
            return
        if ts.accept("="):
            pure.append(Eq(a, self.term()))
            return
        if ts.accept("!="):
            pure.append(Neq(a, self.term()))
            return
        ts.error("expected heap atom")

    def _paren_is_term(self) -> bool:
        # Scan to the matching paren; a term if no heap-level tokens inside.
        depth = 0
        k = 0
        while True:
            t = self.ts.peek(k)
            if t.kind == "eof":
                return True
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                depth -= 1
                if depth == 0:
                    nxt = self.ts.peek(k + 1)
                    return nxt.text in ("|->", "!|->", "=", "!=", "+", "-")
            elif depth >= 1 and t.text in ("|->", "!|->", "*", "=", "!=", "emp", "tru", "ls", "&&"):
                return False
            k += 1

    # outcome := disj ; disj := plus (\/ plus)* ; plus := unary ((+) unary)*
    def outcome(self) -> Outcome:
        ts = self.ts
        p = self.oplus()
        while ts.accept("\\/") or ts.accept("||"):
            p = Or(p, self.oplus())
        return p

    def oplus(self) -> Outcome:
        ts = self.ts
        left = self.ounary()
        if ts.accept("(+)"):
            return OPlus(left, self.oplus())
        if ts.accept("(+)_"):
            ts.expect("{")
            w = self.weight()
            ts.expect("}")
            return oplus_p(w, left, self.oplus())
        return left

    def weight(self) -> Fraction:
        t = self.ts.next()
        if t.kind != "num":
            raise L.ParseError("expected weight literal", t.line, t.col)
        return Fraction(L.parse_number(t.text))

    def ounary(self) -> Outcome:
        ts = self.ts
        t = ts.peek()
        if t.kind == "id" and t.text in ("top", "T"):
            ts.next()
            return Top()
        if t.kind == "id" and t.text in ("ok", "er") and ts.peek(1).text == ":":
            ts.next()
            ts.next()
            return Basic(t.text, self.heap())
        if ts.accept("("):
            inner = self.outcome()
            ts.expect(")")
            if ts.at("_") and ts.peek(1).text == "{":
                ts.next()
                ts.next()
                w = self.weight()
                ts.expect("}")
                return Weighted(inner, w)
            return inner
        ts.error("expected outcome assertion")


def parse_heap(text: str) -> SymbolicHeap:
    p = _AssertionParser(text)
    p.names = {t.text for t in p.ts.toks if t.kind == "id"}
    h = p.heap()
    if p.ts.peek().kind != "eof":
        p.ts.error("trailing input")
    return h


def parse_outcome(text: str) -> Outcome:
    p = _AssertionParser(text)
    p.names = {t.text for t in p.ts.toks if t.kind == "id"}
    o = p.outcome()
    if p.ts.peek().kind != "eof":
        p.ts.error("trailing input")
    return o


# ------------------------------------------------------------ satisfaction


def _value(t: Term, s: Mapping, env: Mapping):
    unbound = [v for v in term_vars(t) if isinstance(v, L.LVar) and v.name in env and env[v.name] is None]
    if unbound:
        return None
    st = dict(s)
    st.update({k: v for k, v in env.items() if v is not None})
    return eval_expr(t, st)


def _pool(s: Mapping, h: Mapping, extra: Iterable = (), fresh: int = 0) -> List:
    vals = {0}
    vals |= {v for v in s.values()}
    vals |= {v for v in h.values() if v is not BOT}
    vals |= set(h)
    vals |= set(extra)
    # Unused values witness existentials that must differ from everything in sight.
    top = int(max(Fraction(v) for v in vals))
    vals |= set(range(top + 1, top + 1 + fresh))
    return sorted(vals, key=lambda v: (Fraction(v),))


def sat_heap(sigma, P: SymbolicHeap, extra: Iterable = ()) -> bool:
    """Does (s,h) satisfy P? `sigma` is a TaggedState or a (store, heap) pair."""
    if isinstance(sigma, TaggedState):
        if sigma.tag == "und":
            return False
        s, h = sigma.s, sigma.h
    else:
        s, h = dict(sigma[0]), dict(sigma[1])
    pool = _pool(s, h, extra, len(P.exists))
    env: Dict[str, object] = {x: None for x in P.exists}
    return _sat(list(P.spatial), list(P.pure), dict(h), False, s, env, pool)


def _is_addr(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _bind_pattern(t: Term, val, s, env) -> Optional[List[Dict]]:
    """Ways to make t evaluate to val by binding unbound existentials."""
    if isinstance(t, L.LVar) and t.name in env and env[t.name] is None:
        return [{t.name: val}]
    v = _value(t, s, env)
    if v is None:
        return None
    return [{}] if v == val else []


def _sat(spatial, pure, h, tru, s, env, pool) -> bool:
    if spatial:
        # Pick the first atom whose address is evaluable.
        for i, a in enumerate(spatial):
            if isinstance(a, Tru):
                return _sat(spatial[:i] + spatial[i + 1:], pure, h, True, s, env, pool)
            addr_t = a.start if isinstance(a, Ls) else a.addr
            loc = _value(addr_t, s, env)
            if loc is None:
                continue
            rest = spatial[:i] + spatial[i + 1:]
            if isinstance(a, PointsTo):
                if not _is_addr(loc) or loc not in h or h[loc] is BOT:
                    return False
                ways = _bind_pattern(a.value, h[loc], s, env)
                if ways is None:
                    return _enumerate(spatial, pure, h, tru, s, env, pool)
                h2 = dict(h)
                del h2[loc]
                return any(_sat(rest, pure, h2, tru, s, {**env, **w}, pool) for w in ways)
            if isinstance(a, Dangling):
                if not _is_addr(loc) or h.get(loc, None) is not BOT:
                    return False
                h2 = dict(h)
                del h2[loc]
                return _sat(rest, pure, h2, tru, s, env, pool)
            if isinstance(a, Ls):
                end = _value(a.end, s, env)
                if end is None:
                    return _enumerate(spatial, pure, h, tru, s, env, pool)
                if loc == end and _sat(rest, pure, h, tru, s, env, pool):
                    return True
                if _is_addr(loc) and loc in h and h[loc] is not BOT:
                    h2 = dict(h)
                    nxt = h2.pop(loc)
                    return _sat(rest + [Ls(L.Const(nxt), L.Const(end))], pure, h2, tru, s, env, pool)
                return False
        # Every remaining atom has an unbound address.
        for i, a in enumerate(spatial):
            if isinstance(a, (PointsTo, Dangling)) and isinstance(a.addr, L.LVar):
                rest = spatial[:i] + spatial[i + 1:]
                for loc in sorted(h):
                    if _sat([type(a)(L.Const(loc), *atom_terms(a)[1:])] + rest, pure, h, tru, s,
                            {**env, a.addr.name: loc}, pool):
                        return True
                return False
        return _enumerate(spatial, pure, h, tru, s, env, pool)
    if h and not tru:
        return False
    for a in pure:
        l, r = _value(a.left, s, env), _value(a.right, s, env)
        if l is None or r is None:
            return _enumerate(spatial, pure, h, tru, s, env, pool)
        if isinstance(a, Eq) and l != r:
            return False
        if isinstance(a, Neq) and l == r:
            return False
    return True


def _enumerate(spatial, pure, h, tru, s, env, pool) -> bool:
    names = [k for k, v in env.items() if v is None]
    needed = set()
    for a in spatial + pure:
        needed |= {v.name for v in atom_vars(a) if isinstance(v, L.LVar)}
    for n in names:
        if n in needed:
            pool2 = pool + sorted(set(h) - set(pool))
            return any(_sat(spatial, pure, h, tru, s, {**env, n: v}, pool) for v in pool2)
    # Unbound names do not occur; treat as bound to anything.
    return _sat(spatial, pure, h, tru, s, {**env, **{n: 0 for n in names}}, pool)


# ------------------------------------------------------- outcome satisfaction


def to_dnf(phi: Outcome) -> List[Outcome]:
    """Disjuncts free of ∨, using (φ∨ψ)_a ≡ (φ)_a∨(ψ)_a and ⊕ distributivity."""
    if isinstance(phi, Or):
        return to_dnf(phi.left) + to_dnf(phi.right)
    if isinstance(phi, OPlus):
        return [OPlus(a, b) for a in to_dnf(phi.left) for b in to_dnf(phi.right)]
    if isinstance(phi, Weighted):
        return [Weighted(a, phi.weight) for a in to_dnf(phi.body)]
    return [phi]


@dataclass
class _Leaf:
    node: Outcome
    factor: Fraction
    parent: int  # index into weighted-node list, -1 for root


def _flatten(phi: Outcome, factor: Fraction, parent: int, leaves: List[_Leaf], nodes: List[Tuple[int, Fraction]]):
    if isinstance(phi, OPlus):
        _flatten(phi.left, factor, parent, leaves, nodes)
        _flatten(phi.right, factor, parent, leaves, nodes)
    elif isinstance(phi, Weighted):
        f = factor * Fraction(phi.weight)
        nodes.append((parent, f))
        _flatten(phi.body, f, len(nodes) - 1, leaves, nodes)
    else:
        leaves.append(_Leaf(phi, factor, parent))


def sat_outcome(m: Weighting, phi: Outcome, budget: int = 16) -> bool:
    if len(m) > budget:
        raise BudgetExceeded(f"support {len(m)} exceeds budget {budget}")
    alg = m.alg
    _check_weights(phi, alg)
    cache: Dict[Tuple[TaggedState, Basic], bool] = {}

    def compat(sigma: TaggedState, leaf: Outcome) -> bool:
        if isinstance(leaf, Top):
            return True
        key = (sigma, leaf)
        if key not in cache:
            cache[key] = sigma.tag == leaf.tag and sat_heap(sigma, leaf.heap)
        return cache[key]

    for disj in to_dnf(phi):
        leaves: List[_Leaf] = []
        nodes: List[Tuple[int, Fraction]] = []
        _flatten(disj, Fraction(1), -1, leaves, nodes)
        live = [l for l in leaves if l.factor != 0]
        states = m.items()
        if alg.name == "nondet":
            if _nondet_feasible(states, live, compat):
                return True
        elif _flow_feasible(states, live, nodes, compat):
            return True
    return False


def _check_weights(phi: Outcome, alg: OutcomeAlgebra) -> None:
    if isinstance(phi, Weighted):
        if not alg.is_weight(phi.weight):
            raise ValueError(f"weight {phi.weight} is not in the {alg.name} algebra")
        _check_weights(phi.body, alg)
    elif isinstance(phi, (Or, OPlus)):
        _check_weights(phi.left, alg)
        _check_weights(phi.right, alg)


def _nondet_feasible(states, leaves, compat) -> bool:
    for sigma, _ in states:
        if not any(compat(sigma, l.node) for l in leaves):
            return False
    for l in leaves:
        if isinstance(l.node, Basic) and not any(compat(sigma, l.node) for sigma, _ in states):
            return False
    return True


def _flow_feasible(states, leaves, nodes, compat) -> bool:
    import networkx as nx

    basic_need = sum((l.factor for l in leaves if isinstance(l.node, Basic)), Fraction(0))
    total = sum((w for _, w in states), Fraction(0))
    if basic_need > total:
        return False
    for sigma, _ in states:
        if not any(compat(sigma, l.node) for l in leaves):
            return False
    # Whole-state assignment first: try each state on one leaf (small cases).
    if len(states) <= 6 and len(leaves) <= 6 and _whole_assignment(states, leaves, nodes, compat):
        return True
    den = 1
    for _, w in states:
        den = lcm(den, w.denominator)
    for l in leaves:
        den = lcm(den, l.factor.denominator)
    for _, f in nodes:
        den = lcm(den, f.denominator)
    sc = lambda q: int(q * den)
    G = nx.DiGraph()
    demand: Dict[object, int] = {"src": -sc(total), "root": 0}
    for i, (sigma, w) in enumerate(states):
        G.add_edge("src", ("s", i), capacity=sc(w), weight=0)
        for j, l in enumerate(leaves):
            if compat(sigma, l.node):
                G.add_edge(("s", i), ("l", j), weight=0)
    for k, (parent, f) in enumerate(nodes):
        G.add_edge(("w", k), ("w", parent) if parent >= 0 else "root", capacity=sc(f), weight=0)
    for j, l in enumerate(leaves):
        tgt = ("w", l.parent) if l.parent >= 0 else "root"
        lo = sc(l.factor) if isinstance(l.node, Basic) else 0
        G.add_edge(("l", j), tgt, capacity=sc(l.factor) - lo, weight=0)
        if lo:
            demand[("l", j)] = demand.get(("l", j), 0) + lo
            demand[tgt] = demand.get(tgt, 0) - lo
    G.add_edge("root", "snk", weight=0)
    demand["snk"] = sc(total)
    for n in list(G.nodes):
        G.nodes[n]["demand"] = demand.get(n, 0)
    try:
        nx.network_simplex(G)
        return True
    except nx.NetworkXUnfeasible:
        return False


def _whole_assignment(states, leaves, nodes, compat) -> bool:
    options = [[j for j, l in enumerate(leaves) if compat(sigma, l.node)] for sigma, _ in states]
    for choice in itertools.product(*options):
        load = [Fraction(0)] * len(leaves)
        for (sigma, w), j in zip(states, choice):
            load[j] += w
        if any(isinstance(l.node, Basic) and load[j] != l.factor for j, l in enumerate(leaves)):
            continue
        if any(load[j] > l.factor for j, l in enumerate(leaves)):
            continue
        node_load = [Fraction(0)] * len(nodes)
        for j, l in enumerate(leaves):
            p = l.parent
            while p >= 0:
                node_load[p] += load[j]
                p = nodes[p][0]
        if all(node_load[k] <= nodes[k][1] for k in range(len(nodes))):
            return True
    return False
