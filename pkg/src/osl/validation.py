"""Bounded semantic validation of entailments, triples and the frame property."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from . import lang as L
from .algebra import BOT, TaggedState, get_algebra, ok
from .assertions import (BudgetExceeded, Dangling, Eq, Ls, Neq, Outcome, PointsTo, SymbolicHeap, Tru,
                         atom_vars, basics, osep, outcome_free_lvars, sat_heap, sat_outcome, substitute,
                         term_vars)
from .concrete import Allocator, AllocatorExhausted, IllFormed, exec_cmd, make_allocator, eval_expr
from .symexec import Summary


@dataclass(frozen=True)
class Bounds:
    max_addr: int = 6
    max_value: int = 4
    max_support: int = 16
    max_models: int = 400
    ls_max: int = 2
    fuel: int = 8
    seed: int = 0


DEFAULT_BOUNDS = Bounds()

# A bare "lvar_keyed" entry expands per model to one allocator keyed on each logical variable.
STANDARD_FAMILY = ("min_free", "min_free_offset(3)", "seeded_random(1, 6)", "seeded_random(2, 6)", "lvar_keyed")


@dataclass
class Verdict:
    ok: bool
    status: str                      # valid | violated | ill-formed | inconclusive
    models: int = 0
    counterexample: Optional[str] = None
    notes: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> dict:
        return {"ok": self.ok, "status": self.status, "models": self.models,
                "counterexample": self.counterexample, "notes": self.notes}


# ------------------------------------------------------------ model search


def _address_terms(P: SymbolicHeap) -> Set:
    out = set()
    for a in P.spatial:
        if isinstance(a, (PointsTo, Dangling)):
            out |= term_vars(a.addr)
        elif isinstance(a, Ls):
            out |= term_vars(a.start) | term_vars(a.end)
    return out


def _restricted_growth(n: int, limit: int, distinct_first: bool = False) -> Iterator[Tuple[int, ...]]:
    """Equality patterns over n items; block k means the k-th distinct value."""
    def go(prefix: List[int], top: int):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        blocks = range(min(top + 1, limit))
        for b in (reversed(blocks) if distinct_first else blocks):
            prefix.append(b)
            yield from go(prefix, max(top, b + 1))
            prefix.pop()
    yield from go([], 0)


def _patterns(n: int, limit: int) -> Iterator[Tuple[int, ...]]:
    """Alternate most-distinct and most-aliased patterns so both get explored early."""
    seen = set()
    for pair in itertools.zip_longest(_restricted_growth(n, limit, True), _restricted_growth(n, limit)):
        for pat in pair:
            if pat is not None and pat not in seen:
                seen.add(pat)
                yield pat


def valuations(names: Sequence, addr_like: Set, bounds: Bounds,
               equalities: Iterable[Tuple] = (), priority: Set = frozenset()) -> Iterator[Dict]:
    """Assignments to variables, enumerated by equality pattern.

    Names joined by `equalities` (pairs of names, or a name and an int) share a
    class. Each pattern over the remaining classes is realized with ascending and
    with descending values, and once more per block with that block null; this
    reaches aliasing, non-aliasing, null and address-order cases within the bounds.
    Classes containing a `priority` name are enumerated first, so the distinct
    patterns they need come early.
    """
    names = list(names)
    parent = {x: x for x in names}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pinned: Dict = {}
    for a, b in equalities:
        if isinstance(b, int):
            r = find(a)
            if pinned.get(r, b) != b:
                return
            pinned[r] = b
        else:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
                if ra in pinned:
                    if pinned.get(rb, pinned[ra]) != pinned[ra]:
                        return
                    pinned[rb] = pinned.pop(ra)
    members = {}
    for x in names:
        members.setdefault(find(x), []).append(x)
    roots = sorted(members, key=lambda v: (not any(m in priority for m in members[v]),
                                           isinstance(v, L.LVar), v.name))
    free = [r for r in roots if r not in pinned]
    n = len(free)
    seen = set()
    taken = set(pinned.values())
    for pat in _patterns(n, bounds.max_addr + 1):
        k = max(pat) + 1 if pat else 0
        modes = [("asc", -1), ("desc", -1)] + [("asc", b) for b in range(k)]
        for mode, null_block in modes:
            vals = []
            used = set(taken)
            for b in range(k):
                is_addr = any(m in addr_like for i in range(n) if pat[i] == b for m in members[free[i]])
                hi = bounds.max_addr if is_addr else bounds.max_value
                if b == null_block:
                    v = 0
                else:
                    rng = range(1, hi + 1) if mode == "asc" else range(hi, 0, -1)
                    v = next((x for x in rng if x not in used), None)
                    if v is None:
                        # More classes than bounded values: spill past the bound.
                        v = next(x for x in itertools.count(hi + 1) if x not in used)
                used.add(v)
                vals.append(v)
            env = {}
            for r in roots:
                val = pinned[r] if r in pinned else vals[pat[free.index(r)]]
                for m in members[r]:
                    env[m] = val
            key = tuple(sorted(env.items(), key=lambda kv: str(kv[0])))
            if key not in seen:
                seen.add(key)
                yield env


def _ground(t, env: Dict) -> Optional[int]:
    st = {v.name: env[v] for v in term_vars(t) if v in env}
    return eval_expr(t, st)


def _offset(t) -> Optional[Tuple[object, int]]:
    """Read t as v + k for a single variable v and integer k."""
    if isinstance(t, (L.Var, L.LVar)):
        return t, 0
    if isinstance(t, L.BinOp) and t.op in ("+", "-"):
        for a, b, sign in ((t.left, t.right, 1), (t.right, t.left, 1 if t.op == "+" else None)):
            if sign and isinstance(b, L.Const) and isinstance(b.value, int):
                inner = _offset(a)
                if inner:
                    return inner[0], inner[1] + (b.value if t.op == "+" else -b.value)
    return None


def models(P: SymbolicHeap, extra_vars: Iterable = (), bounds: Bounds = DEFAULT_BOUNDS,
           extra_lvars: Iterable[str] = ()) -> Iterator[Tuple[Dict[str, int], TaggedState]]:
    """Concrete (logical valuation, ok-state) pairs satisfying P, within the bounds.

    Free logical variables of P plus `extra_lvars` are valued too, so callers can
    instantiate other assertions with the same valuation.
    """
    Pq = P.rename_bound(set())
    body = SymbolicHeap((), Pq.pure, Pq.spatial)
    names = set()
    for a in body.atoms():
        names |= atom_vars(a)
    names |= {L.Var(x) if isinstance(x, str) else x for x in extra_vars}
    names |= {L.LVar(x) for x in extra_lvars}
    names = sorted(names, key=lambda v: (isinstance(v, L.LVar), v.name))
    addr_like = _address_terms(body)
    eqs = []
    for a in body.pure:
        if isinstance(a, Eq):
            l, r = a.left, a.right
            if isinstance(l, L.Const):
                l, r = r, l
            if isinstance(l, (L.Var, L.LVar)) and isinstance(r, (L.Var, L.LVar)):
                eqs.append((l, r))
            elif isinstance(r, L.Const) and isinstance(r.value, int) and _offset(l):
                v, k = _offset(l)
                eqs.append((v, r.value - k))
    count = attempts = 0
    diseq = {v for a in body.pure if isinstance(a, Neq) for v in atom_vars(a)}
    for env in valuations(names, addr_like, bounds, eqs, diseq):
        attempts += 1
        if attempts > max(50 * bounds.max_models, 5000):
            return
        for sigma in _heaps(body, env, bounds):
            if not sat_heap(sigma, body.subst({v: L.Const(env[v]) for v in env if isinstance(v, L.LVar)})):
                continue
            lv = {v.name: val for v, val in env.items() if isinstance(v, L.LVar) and v.name not in Pq.exists}
            yield lv, sigma
            count += 1
            if count >= bounds.max_models:
                return


def _heaps(P: SymbolicHeap, env: Dict, bounds: Bounds) -> Iterator[TaggedState]:
    store = {v.name: val for v, val in env.items() if isinstance(v, L.Var)}
    for a in P.pure:
        l, r = _ground(a.left, env), _ground(a.right, env)
        if (l == r) != isinstance(a, Eq):
            return
    fixed: Dict[int, object] = {}
    segs = []
    for a in P.spatial:
        if isinstance(a, Tru):
            continue
        if isinstance(a, Ls):
            segs.append((_ground(a.start, env), _ground(a.end, env)))
            continue
        addr = _ground(a.addr, env)
        if not isinstance(addr, int) or addr < 1 or addr in fixed:
            return
        fixed[addr] = BOT if isinstance(a, Dangling) else _ground(a.value, env)
    tru = P.has_tru
    for lens in itertools.product(range(bounds.ls_max + 1), repeat=len(segs)):
        h = dict(fixed)
        good = True
        for (s, e), n in zip(segs, lens):
            if n == 0:
                if s != e:
                    good = False
                    break
                continue
            cur = s
            for i in range(n):
                nxt = e if i == n - 1 else next((x for x in range(1, bounds.max_addr + 3)
                                                 if x not in h and x != cur and x != e), None)
                if nxt is None or not isinstance(cur, int) or cur < 1 or cur in h:
                    good = False
                    break
                h[cur] = nxt
                cur = nxt
            if not good:
                break
        if not good:
            continue
        yield ok(store, h)
        if tru:
            spare = next((x for x in range(1, bounds.max_addr + 2) if x not in h), None)
            if spare is not None:
                yield ok(store, {**h, spare: 0})


def _inst_heap(P: SymbolicHeap, lv: Dict[str, int]) -> SymbolicHeap:
    return P.subst({L.LVar(k): L.Const(v) for k, v in lv.items()})


def _inst_outcome(phi: Outcome, lv: Dict[str, int]) -> Outcome:
    return substitute(phi, {L.LVar(k): L.Const(v) for k, v in lv.items()})


def semantic_entails(P: SymbolicHeap, Q: SymbolicHeap, bounds: Bounds = DEFAULT_BOUNDS) -> Verdict:
    """Search bounded models of P for one that falsifies Q."""
    extra = Q.free_lvars() - P.free_lvars()
    xs = {x for x in Q.program_vars() | P.program_vars()}
    n = 0
    for lv, sigma in models(P, xs, bounds, extra):
        n += 1
        if not sat_heap(sigma, _inst_heap(Q, lv)):
            return Verdict(False, "violated", n, f"{sigma} with {lv}")
    return Verdict(True, "valid", n)


# ---------------------------------------------------------------- triples


def _program_vars_of(c: L.Command, program: Optional[L.Program]) -> Set[str]:
    out = set(L.mod(c, program))

    def exprs(c):
        if isinstance(c, L.Assign):
            yield c.expr
        elif isinstance(c, (L.Free,)):
            yield c.addr
        elif isinstance(c, L.Store):
            yield c.addr
            yield c.value
        elif isinstance(c, L.Load):
            yield c.addr
        elif isinstance(c, (L.Assume, L.While, L.If)):
            yield c.cond
        elif isinstance(c, L.Call):
            yield from c.args
        for s in L.subcommands(c):
            yield from exprs(s)

    for e in exprs(c):
        out |= L.expr_vars(e)
    return out


def check_triple(c: L.Command, summary: Summary, algebra: Optional[str] = None,
                 family: Sequence = STANDARD_FAMILY, bounds: Bounds = DEFAULT_BOUNDS,
                 program: Optional[L.Program] = None) -> Verdict:
    """Check ⟨ok:P⟩ c ⟨φ⟩ on bounded models of P under every allocator in the family."""
    alg = get_algebra(algebra or summary.algebra)
    P, phi = summary.pre, summary.post
    xs = _program_vars_of(c, program) | P.program_vars()
    for b in basics(phi):
        xs |= b.heap.program_vars()
    extra = outcome_free_lvars(phi) - P.free_lvars()
    keyed = "lvar_keyed" in family
    allocators = [make_allocator(a) for a in family if a != "lvar_keyed"]
    n = 0
    notes: List[str] = []
    for lv, sigma in models(P, xs, bounds, extra):
        n += 1
        post = _inst_outcome(phi, lv)
        run = [(af, sigma) for af in allocators]
        if keyed:
            # Logical variables join the store so the allocator can read them.
            wide = ok({**sigma.s, **lv}, sigma.h)
            run += [(Allocator("lvar_keyed", (x,)), wide) for x in sorted(lv)[:2]]
        for af, sigma in run:
            try:
                m = exec_cmd(c, sigma, alg, af, bounds.fuel, program)
            except IllFormed as e:
                return Verdict(False, "ill-formed", n, f"{sigma}: {e}")
            except AllocatorExhausted as e:
                notes.append(f"{af}: {e}")
                continue
            try:
                good = sat_outcome(m, post, bounds.max_support)
            except BudgetExceeded as e:
                notes.append(str(e))
                continue
            if not good:
                return Verdict(False, "violated", n,
                               f"from {sigma} with {lv or '{}'} under {af}: {sorted(map(str, m.support()))}")
    if n == 0:
        return Verdict(True, "inconclusive", 0, None, ["precondition has no model within the bounds"])
    return Verdict(True, "valid", n, None, notes)


def check_frame_closure(c: L.Command, summary: Summary, F: SymbolicHeap, algebra: Optional[str] = None,
                        family: Sequence = STANDARD_FAMILY, bounds: Bounds = DEFAULT_BOUNDS,
                        program: Optional[L.Program] = None) -> Verdict:
    """A valid triple stays valid after framing F onto both sides, given fv(F) ∩ mod(c) = ∅."""
    clash = F.program_vars() & L.mod(c, program)
    if clash:
        raise ValueError(f"frame mentions modified variables {sorted(clash)}")
    framed = Summary(summary.pre.star(F), osep(summary.post, F), summary.proc, summary.mode,
                     algebra or summary.algebra, summary.unroll, summary.provenance)
    return check_triple(c, framed, algebra, family, bounds, program)


def alloc_negative_example() -> Tuple[L.Command, Summary]:
    """⟨ok: emp⟩ x := alloc() ⟨ok: x = 1 ∧ x ↦ −⟩ holds only for a lucky allocator."""
    from .assertions import parse_heap, parse_outcome
    return L.parse_command("x := alloc()"), Summary(parse_heap("emp"), parse_outcome("ok: x = 1 * x |-> _"),
                                                    algebra="det")
