"""Linear temporal formulas over circuit predicates.

Atoms are ordinary expressions read as predicates (defined and nonzero).
``Next`` looks one cycle ahead, ``BoundedFuture(k, f)`` requires ``f`` at the
current cycle and the ``k - 1`` following ones, and ``Always`` requires ``f``
forever.  ``Always`` is only ever evaluated as a bounded check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from ..ir import Circuit, Expr, referenced_names


class Formula:
    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And((self, other))

    def __or__(self, other: "Formula") -> "Formula":
        return Or((self, other))

    def __invert__(self) -> "Formula":
        return Not(self)

    def __rshift__(self, other: "Formula") -> "Formula":
        return Implies(self, other)


@dataclass(frozen=True, slots=True)
class Atom(Formula):
    expr: Expr


@dataclass(frozen=True, slots=True)
class Next(Formula):
    body: Formula


@dataclass(frozen=True, slots=True)
class BoundedFuture(Formula):
    k: int
    body: Formula

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"bounded future needs k >= 1, got {self.k}")


@dataclass(frozen=True, slots=True)
class Always(Formula):
    body: Formula


@dataclass(frozen=True, slots=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    parts: tuple[Formula, ...]


@dataclass(frozen=True, slots=True)
class Or(Formula):
    parts: tuple[Formula, ...]


@dataclass(frozen=True, slots=True)
class Implies(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True, slots=True)
class Iff(Formula):
    lhs: Formula
    rhs: Formula


TEMPORAL = (Next, BoundedFuture, Always)


def all_of(parts: Iterable[Formula]) -> Formula:
    parts = tuple(parts)
    return parts[0] if len(parts) == 1 else And(parts)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, Atom):
        return ()
    if isinstance(f, (Next, BoundedFuture, Always, Not)):
        return (f.body,)
    if isinstance(f, (And, Or)):
        return f.parts
    return (f.lhs, f.rhs)


def atoms(f: Formula) -> list[Expr]:
    out, stack = [], [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Atom):
            out.append(g.expr)
        else:
            stack.extend(reversed(children(g)))
    return out


def names(f: Formula) -> set[str]:
    found: set[str] = set()
    for a in atoms(f):
        found |= referenced_names(a)
    return found


def has_always(f: Formula) -> bool:
    return isinstance(f, Always) or any(has_always(g) for g in children(f))


def depth(f: Formula) -> int:
    """Number of cycles beyond the evaluation point that ``f`` inspects.

    ``Always`` has unbounded depth and raises.
    """
    if isinstance(f, Atom):
        return 0
    if isinstance(f, Next):
        return 1 + depth(f.body)
    if isinstance(f, BoundedFuture):
        return f.k - 1 + depth(f.body)
    if isinstance(f, Always):
        raise ValueError("always has no finite depth")
    return max((depth(g) for g in children(f)), default=0)


class HorizonExceeded(Exception):
    """An ``Always`` was asked for an exact verdict."""


def holds_at(
    c: Circuit,
    mu: Mapping,
    i: int,
    f: Formula,
    horizon: int | None = None,
    *,
    exact: bool = False,
) -> bool:
    """``C, mu, i |= f`` by simulating from ``mu``.

    ``horizon`` bounds how far ``Always`` looks (cycles ``< horizon``); with
    ``exact=True`` an ``Always`` raises :class:`HorizonExceeded` instead of
    returning a bounded verdict.
    """
    from ..simulator import compiled

    fast = compiled(c)
    states = [dict(mu)]

    def state(n: int):
        while len(states) <= n:
            states.append(fast.step(states[-1]))
        return states[n]

    if horizon is None:
        try:
            horizon = i + depth(f) + 1
        except ValueError:
            if exact:
                raise HorizonExceeded("always needs an explicit horizon") from None
            horizon = i + 64

    def ev(g: Formula, n: int) -> bool:
        if isinstance(g, Atom):
            return fast.predicate(g.expr)(state(n))
        if isinstance(g, Next):
            return ev(g.body, n + 1)
        if isinstance(g, BoundedFuture):
            return all(ev(g.body, n + j) for j in range(g.k))
        if isinstance(g, Always):
            if exact:
                raise HorizonExceeded("always cannot be decided on a finite trace")
            return all(ev(g.body, j) for j in range(n, max(n + 1, horizon)))
        if isinstance(g, Not):
            return not ev(g.body, n)
        if isinstance(g, And):
            return all(ev(p, n) for p in g.parts)
        if isinstance(g, Or):
            return any(ev(p, n) for p in g.parts)
        if isinstance(g, Implies):
            return (not ev(g.lhs, n)) or ev(g.rhs, n)
        if isinstance(g, Iff):
            return ev(g.lhs, n) == ev(g.rhs, n)
        raise TypeError(g)

    return ev(f, i)
