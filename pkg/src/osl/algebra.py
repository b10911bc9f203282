"""Outcome algebras and the weighting-function monad with error passthrough."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, Iterator, Mapping, Optional, Tuple, Union


class _Undefined:
    """Result of a partial sum that has no value in the algebra."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "UNDEFINED"

    def __bool__(self) -> bool:
        return False


UNDEFINED = _Undefined()

Weight = Fraction
ZERO = Fraction(0)
ONE = Fraction(1)


def as_weight(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


@dataclass(frozen=True)
class OutcomeAlgebra:
    """One of the three partial semirings: det, nondet or prob.

    Every weight is stored as a Fraction; det and nondet restrict the carrier
    to {0, 1}.
    """

    name: str

    def __post_init__(self) -> None:
        if self.name not in ("det", "nondet", "prob"):
            raise ValueError(f"unknown algebra {self.name!r}")

    @property
    def zero(self) -> Fraction:
        return ZERO

    @property
    def one(self) -> Fraction:
        return ONE

    def is_weight(self, v) -> bool:
        if isinstance(v, bool) or not isinstance(v, (int, Fraction)):
            return False
        if self.name == "prob":
            return 0 <= v <= 1
        return v == 0 or v == 1

    def check(self, v) -> Fraction:
        if not self.is_weight(v):
            raise TypeError(f"{v!r} is not a {self.name} weight")
        return as_weight(v)

    def add(self, a: Fraction, b: Fraction):
        if self.name == "nondet":
            return max(a, b)
        s = a + b
        if s > 1:
            return UNDEFINED
        return s

    def mul(self, a: Fraction, b: Fraction) -> Fraction:
        return a * b

    def total(self, ws: Iterable[Fraction]):
        acc = ZERO
        for w in ws:
            acc = self.add(acc, w)
            if acc is UNDEFINED:
                return UNDEFINED
        return acc


DET = OutcomeAlgebra("det")
NONDET = OutcomeAlgebra("nondet")
PROB = OutcomeAlgebra("prob")
ALGEBRAS = {"det": DET, "nondet": NONDET, "prob": PROB}


def get_algebra(alg: Union[str, OutcomeAlgebra]) -> OutcomeAlgebra:
    return alg if isinstance(alg, OutcomeAlgebra) else ALGEBRAS[alg]


def wadd(alg: OutcomeAlgebra, a, b):
    return alg.add(as_weight(a), as_weight(b))


def wmul(alg: OutcomeAlgebra, a, b) -> Fraction:
    return alg.mul(as_weight(a), as_weight(b))


# Machine states. Stores are tuples of (name, value) sorted by name with zero
# entries dropped (unmapped names read as 0). Heaps are sorted (addr, value)
# tuples where the value may be BOT.


class _Bot:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "⊥"

    # ⊥ sorts after every value so heaps with mixed cells stay orderable.
    def __lt__(self, other) -> bool:
        return False

    def __gt__(self, other) -> bool:
        return other is not self

    def __le__(self, other) -> bool:
        return other is self

    def __ge__(self, other) -> bool:
        return True

    def __reduce__(self):
        return (_Bot, ())


BOT = _Bot()

Store = Tuple[Tuple[str, object], ...]
Heap = Tuple[Tuple[int, object], ...]


def norm_value(v):
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v.numerator)
    if isinstance(v, bool):
        return int(v)
    return v


def make_store(d: Mapping[str, object]) -> Store:
    return tuple(sorted((k, norm_value(v)) for k, v in d.items() if v != 0))


def make_heap(d: Mapping[int, object]) -> Heap:
    return tuple(sorted((k, norm_value(v) if v is not BOT else BOT) for k, v in d.items()))


@dataclass(frozen=True, order=True)
class TaggedState:
    """ok(s,h), er(s,h) or und (store and heap are None for und)."""

    tag: str
    store: Optional[Store] = None
    heap: Optional[Heap] = None

    def __post_init__(self) -> None:
        if self.tag not in ("ok", "er", "und"):
            raise ValueError(self.tag)

    @property
    def s(self) -> Dict[str, object]:
        return dict(self.store or ())

    @property
    def h(self) -> Dict[int, object]:
        return dict(self.heap or ())

    def __str__(self) -> str:
        if self.tag == "und":
            return "und"
        st = ", ".join(f"{k}={v}" for k, v in self.store)
        hp = ", ".join(f"{a}->{v}" for a, v in self.heap)
        return f"{self.tag} {{{st}}} {{{hp}}}"


UND = TaggedState("und")


def ok(store, heap=()) -> TaggedState:
    return TaggedState("ok", _fs(store), _fh(heap))


def er(store, heap=()) -> TaggedState:
    return TaggedState("er", _fs(store), _fh(heap))


def _fs(s) -> Store:
    return make_store(s) if isinstance(s, Mapping) else make_store(dict(s))


def _fh(h) -> Heap:
    return make_heap(h) if isinstance(h, Mapping) else make_heap(dict(h))


class Weighting:
    """Finitely supported map from tagged states to nonzero weights.

    Construction goes through `from_items`, which rejects undefined totals.
    """

    __slots__ = ("alg", "_w", "_hash")

    def __init__(self, alg: OutcomeAlgebra, w: Optional[Dict[TaggedState, Fraction]] = None):
        self.alg = alg
        self._w: Dict[TaggedState, Fraction] = {}
        for k, v in (w or {}).items():
            v = as_weight(v)
            if v != 0:
                self._w[k] = v
        self._hash = None

    @classmethod
    def from_items(cls, alg: OutcomeAlgebra, items: Iterable[Tuple[TaggedState, object]]):
        """Accumulate with the algebra's sum; returns UNDEFINED if any sum is."""
        acc: Dict[TaggedState, Fraction] = {}
        for k, v in items:
            v = as_weight(v)
            if v == 0:
                continue
            if k in acc:
                s = alg.add(acc[k], v)
                if s is UNDEFINED:
                    return UNDEFINED
                acc[k] = s
            else:
                acc[k] = v
        m = cls(alg, acc)
        if m.mass() is UNDEFINED:
            return UNDEFINED
        return m

    def __getitem__(self, k: TaggedState) -> Fraction:
        return self._w.get(k, ZERO)

    def __iter__(self) -> Iterator[TaggedState]:
        return iter(sorted(self._w))

    def __len__(self) -> int:
        return len(self._w)

    def items(self):
        return sorted(self._w.items())

    def support(self):
        return sorted(self._w)

    def mass(self):
        return self.alg.total(self._w.values())

    def __eq__(self, other) -> bool:
        return isinstance(other, Weighting) and self.alg == other.alg and self._w == other._w

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.alg.name, frozenset(self._w.items())))
        return self._hash

    def __repr__(self) -> str:
        inner = ", ".join(f"{k} ↦ {v}" for k, v in self.items())
        return f"Weighting[{self.alg.name}]{{{inner}}}"


def empty(alg: OutcomeAlgebra) -> Weighting:
    return Weighting(alg)


def unit(alg: OutcomeAlgebra, sigma: TaggedState) -> Weighting:
    return Weighting(alg, {sigma: ONE})


def mass(m: Weighting):
    return m.mass()


def scale(a, m: Weighting) -> Weighting:
    a = m.alg.check(a)
    return Weighting(m.alg, {k: m.alg.mul(a, v) for k, v in m._w.items()})


def wsum(m1: Weighting, m2: Weighting):
    """Pointwise sum; UNDEFINED when a point or the total mass is undefined."""
    if m1.alg != m2.alg:
        raise TypeError("mixed algebras")
    return Weighting.from_items(m1.alg, list(m1._w.items()) + list(m2._w.items()))


def bind(m: Weighting, k: Callable[[TaggedState], Weighting]):
    """Kleisli extension; er and und states pass through untouched."""
    items = []
    for sigma, a in m._w.items():
        if sigma.tag != "ok":
            items.append((sigma, a))
            continue
        r = k(sigma)
        if r is UNDEFINED:
            return UNDEFINED
        for tau, b in r._w.items():
            items.append((tau, m.alg.mul(a, b)))
    return Weighting.from_items(m.alg, items)


def normalize(m: Weighting) -> Tuple[Fraction, Weighting]:
    if not len(m):
        raise ValueError("cannot normalize the empty weighting")
    total = m.mass()
    if m.alg.name == "nondet":
        return total, m
    return total, Weighting(m.alg, {k: v / total for k, v in m._w.items()})
