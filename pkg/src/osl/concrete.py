"""Denotational interpreter over concrete stores and heaps."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

from .algebra import (BOT, ONE, UND, UNDEFINED, OutcomeAlgebra, TaggedState, Weighting,
                      bind, empty, get_algebra, norm_value, scale, unit, wsum)
from . import lang as L


class IllFormed(Exception):
    """Execution reached an undefined sum or a non-weight assume."""


class AllocatorExhausted(Exception):
    pass


# ----------------------------------------------------------------- expressions


def eval_expr(e: L.Expr, s: Dict[str, object]):
    if isinstance(e, L.Const):
        return norm_value(e.value)
    if isinstance(e, (L.Var, L.LVar)):
        return s.get(e.name, 0)
    if isinstance(e, L.Not):
        return 1 if eval_expr(e.arg, s) == 0 else 0
    if isinstance(e, L.BinOp):
        a = eval_expr(e.left, s)
        if e.op == "&&":
            return 1 if a != 0 and eval_expr(e.right, s) != 0 else 0
        b = eval_expr(e.right, s)
        if e.op == "+":
            return norm_value(Fraction(a) + b) if isinstance(a, Fraction) or isinstance(b, Fraction) else a + b
        if e.op == "-":
            return norm_value(Fraction(a) - b) if isinstance(a, Fraction) or isinstance(b, Fraction) else a - b
        if e.op == "=":
            return 1 if a == b else 0
        if e.op == "<=":
            return 1 if a <= b else 0
    raise TypeError(f"not an expression: {e!r}")


# ------------------------------------------------------------------ allocators


@dataclass(frozen=True)
class Allocator:
    """Named allocation strategy.

    `choose(alg, s, h)` returns (address, initial value, weight) triples whose
    weights total one in the algebra and whose addresses are all fresh.
    """

    name: str
    params: Tuple = ()

    def choose(self, alg: OutcomeAlgebra, s: Dict[str, object], h: Dict[int, object]):
        if self.name == "min_free":
            return [(_first_free(h, 1), 0, ONE)]
        if self.name == "min_free_offset":
            return [(_first_free(h, max(1, self.params[0])), 0, ONE)]
        if self.name == "lvar_keyed":
            x = self.params[0]
            key = s.get(x, 0)
            start = key if isinstance(key, int) and key >= 1 else 1
            return [(_first_free(h, start), key, ONE)]
        if self.name == "seeded_random":
            seed, bound = self.params[0], self.params[1]
            values = self.params[2] if len(self.params) > 2 else (0,)
            free = [a for a in range(1, bound + 1) if a not in h]
            if not free:
                raise AllocatorExhausted(f"no free address below {bound}")
            key = f"{seed}|{sorted(s.items())}|{sorted(h.items(), key=lambda kv: kv[0])}"
            rng = random.Random(key)
            if alg.name == "det" or len(free) == 1:
                return [(rng.choice(free), rng.choice(values), ONE)]
            a1, a2 = rng.sample(free, 2)
            w = ONE if alg.name == "nondet" else Fraction(1, 2)
            return [(a1, rng.choice(values), w), (a2, rng.choice(values), w)]
        raise ValueError(f"unknown allocator {self.name}")

    def __str__(self) -> str:
        return f"{self.name}({', '.join(map(str, self.params))})" if self.params else self.name


def _first_free(h, start: int) -> int:
    a = start
    while a in h:
        a += 1
    return a


def make_allocator(spec) -> Allocator:
    """Build an allocator from a name or a (name, *params) tuple or a string like
    'min_free_offset(10)'."""
    if isinstance(spec, Allocator):
        return spec
    if isinstance(spec, str):
        spec = spec.strip()
        if "(" in spec:
            name, rest = spec.split("(", 1)
            args = [a.strip() for a in rest.rstrip(")").split(",") if a.strip()]
            spec = (name.strip(), *[int(a) if a.lstrip("-").isdigit() else a for a in args])
        else:
            spec = (spec,)
    name, *params = spec
    if name not in ("min_free", "min_free_offset", "seeded_random", "lvar_keyed"):
        raise ValueError(f"unknown allocator {name!r}")
    arity = {"min_free": (0,), "min_free_offset": (1,), "seeded_random": (2, 3), "lvar_keyed": (1,)}[name]
    if len(params) not in arity:
        raise ValueError(f"allocator {name} takes {arity} parameters")
    if name == "seeded_random" and len(params) == 3:
        params[2] = tuple(params[2])
    return Allocator(name, tuple(params))


MIN_FREE = Allocator("min_free")


# --------------------------------------------------------------------- exec


def _state(tag: str, s: Dict[str, object], h: Dict[int, object]) -> TaggedState:
    return TaggedState(tag, tuple(sorted((k, norm_value(v)) for k, v in s.items() if v != 0)),
                       tuple(sorted(h.items())))


def _update(alg, sigma: TaggedState, addr_e: L.Expr, act: Callable) -> Weighting:
    s, h = sigma.s, sigma.h
    loc = eval_expr(addr_e, s)
    if loc == 0:
        return unit(alg, TaggedState("er", sigma.store, sigma.heap))
    if not isinstance(loc, int) or loc not in h:
        return unit(alg, UND)
    if h[loc] is BOT:
        return unit(alg, TaggedState("er", sigma.store, sigma.heap))
    s2, h2 = act(s, h, loc)
    return unit(alg, _state("ok", s2, h2))


class Interpreter:
    def __init__(self, alg, af: Allocator = MIN_FREE, fuel: int = 8,
                 program: Optional[L.Program] = None):
        self.alg = get_algebra(alg)
        self.af = make_allocator(af)
        self.fuel = fuel
        self.program = program

    def run(self, c: L.Command, sigma: TaggedState) -> Weighting:
        alg = self.alg
        if sigma.tag != "ok":
            return unit(alg, sigma)
        if isinstance(c, L.Skip):
            return unit(alg, sigma)
        if isinstance(c, L.Seq):
            return self._bind(self.run(c.first, sigma), lambda t: self.run(c.second, t))
        if isinstance(c, L.Choice):
            r = wsum(self.run(c.left, sigma), self.run(c.right, sigma))
            if r is UNDEFINED:
                raise IllFormed(f"undefined sum in choice {L.show(c)} from {sigma}")
            return r
        if isinstance(c, L.Assume):
            v = eval_expr(c.cond, sigma.s)
            if not alg.is_weight(v):
                raise IllFormed(f"assume({L.show_expr(c.cond)}) evaluated to {v}, not a {alg.name} weight")
            return scale(v, unit(alg, sigma))
        if isinstance(c, L.While):
            return self._loop(c, sigma, self.fuel)
        if isinstance(c, (L.If, L.PChoice, L.Malloc)):
            return self.run(L.desugar(c), sigma)
        if isinstance(c, L.Assign):
            s = sigma.s
            s[c.var] = eval_expr(c.expr, s)
            return unit(alg, _state("ok", s, sigma.h))
        if isinstance(c, L.Alloc):
            s, h = sigma.s, sigma.h
            items = []
            for loc, val, w in self.af.choose(alg, s, h):
                if loc in h or loc <= 0:
                    raise AllocatorExhausted(f"allocator {self.af} returned used address {loc}")
                s2 = dict(s)
                s2[c.var] = loc
                h2 = dict(h)
                h2[loc] = val
                items.append((_state("ok", s2, h2), w))
            r = Weighting.from_items(alg, items)
            if r is UNDEFINED:
                raise IllFormed("allocator produced an undefined weighting")
            return r
        if isinstance(c, L.Free):
            return _update(alg, sigma, c.addr, lambda s, h, l: (s, {**h, l: BOT}))
        if isinstance(c, L.Store):
            v = eval_expr(c.value, sigma.s)
            return _update(alg, sigma, c.addr, lambda s, h, l: (s, {**h, l: v}))
        if isinstance(c, L.Load):
            return _update(alg, sigma, c.addr, lambda s, h, l: ({**s, c.var: h[l]}, h))
        if isinstance(c, L.Error):
            return unit(alg, TaggedState("er", sigma.store, sigma.heap))
        if isinstance(c, L.Call):
            if self.program is None or c.proc not in self.program.procs:
                raise L.ProgramError(f"unknown procedure {c.proc}")
            p = self.program.procs[c.proc]
            if len(p.params) != len(c.args):
                raise L.ProgramError(f"arity mismatch calling {c.proc}")
            s = sigma.s
            vals = [eval_expr(a, s) for a in c.args]
            s.update(zip(p.params, vals))
            return self.run(p.body, _state("ok", s, sigma.h))
        raise TypeError(f"not a command: {c!r}")

    def _bind(self, m, k):
        r = bind(m, k)
        if r is UNDEFINED:
            raise IllFormed("undefined sum while sequencing")
        return r

    def _loop(self, c: L.While, sigma: TaggedState, n: int) -> Weighting:
        if n == 0:
            return empty(self.alg)
        g = eval_expr(c.cond, sigma.s)
        if g == 1:
            return self._bind(self.run(c.body, sigma), lambda t: self._loop(c, t, n - 1))
        if g == 0:
            return unit(self.alg, sigma)
        raise IllFormed(f"loop guard {L.show_expr(c.cond)} evaluated to {g}")


def exec_cmd(c: L.Command, sigma: TaggedState, alg="det", af=MIN_FREE, fuel: int = 8,
             program: Optional[L.Program] = None) -> Weighting:
    return Interpreter(alg, af, fuel, program).run(c, sigma)


def exec_lifted(c: L.Command, m: Weighting, af=MIN_FREE, fuel: int = 8,
                program: Optional[L.Program] = None) -> Weighting:
    it = Interpreter(m.alg, af, fuel, program)
    return it._bind(m, lambda t: it.run(c, t))


def run_program(program: L.Program, alg="det", af=MIN_FREE, fuel: int = 8,
                store=None, heap=None, proc: Optional[str] = None) -> Weighting:
    from .algebra import ok
    p = program.procs[proc or program.entry]
    return exec_cmd(p.body, ok(store or {}, heap or {}), alg, af, fuel, program)


def format_weighting(m: Weighting) -> List[str]:
    return [f"{sigma} ↦ {w}" for sigma, w in m.items()]


def weighting_json(m: Weighting) -> dict:
    out = []
    for sigma, w in m.items():
        out.append({
            "tag": sigma.tag,
            "store": None if sigma.store is None else {k: str(v) for k, v in sigma.store},
            "heap": None if sigma.heap is None else {str(a): ("bot" if v is BOT else str(v)) for a, v in sigma.heap},
            "weight": str(w),
        })
    return {"algebra": m.alg.name, "outcomes": out}
