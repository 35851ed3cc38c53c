"""Validity of bounded temporal formulas over all states of a circuit.

A formula is valid when it holds at cycle 0 from every valuation.  Two
interchangeable backends decide this:

* :class:`ExhaustiveChecker` simulates every valuation allowed by a
  :class:`DomainBounds`;
* :class:`SymbolicChecker` unrolls the circuit, bit-blasts it and asks the
  SAT solver for a valuation refuting the formula.

Both answer queries of the shape "premises imply conclusion" so that the
invariant learner can reuse one unrolling across many queries.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from ..ir import BOT, Circuit, Expr
from ..simulator import compiled
from .blast import BitBlaster, Unrolling
from .formula import (
    Always,
    And,
    Atom,
    BoundedFuture,
    Formula,
    Iff,
    Implies,
    Next,
    Not,
    Or,
    depth,
    has_always,
    holds_at,
)
from .sat import make_solver


class DomainTooLarge(Exception):
    pass


@dataclass(frozen=True)
class DomainBounds:
    """A finite set of initial valuations.

    ``values`` restricts a scalar register, or every free cell of an array,
    to the listed values.  ``free_cells`` limits an array to its first ``n``
    cells ranging freely; the remaining cells are fixed to ``fill``.  Names
    not mentioned range over every value of their width, plus ``BOT`` when
    ``allow_bot`` is set.  ``fixed`` pins registers to one value.
    """

    values: Mapping[str, tuple] = field(default_factory=dict)
    free_cells: Mapping[str, int] = field(default_factory=dict)
    fixed: Mapping[str, object] = field(default_factory=dict)
    fill: int = 0
    allow_bot: bool = True
    max_states: int = 5_000_000

    def choices(self, c: Circuit, name: str) -> tuple:
        if name in self.fixed:
            return (self.fixed[name],)
        if name in self.values:
            return tuple(self.values[name])
        d = c.registers[name]
        rng = tuple(range(1 << d.width))
        return rng + (BOT,) if self.allow_bot else rng

    def axes(self, c: Circuit) -> list[tuple[str, int | None, tuple]]:
        """One axis per free scalar or array cell: (name, cell or None, values)."""
        out = []
        for d in c.decls:
            if d.is_array:
                if d.name in self.fixed:
                    continue
                free = min(self.free_cells.get(d.name, d.length), d.length)
                vals = self.choices(c, d.name)
                out += [(d.name, k, vals) for k in range(free)]
            else:
                out.append((d.name, None, self.choices(c, d.name)))
        return out

    def size(self, c: Circuit) -> int:
        return math.prod(len(v) for _, _, v in self.axes(c))

    def enumerate(self, c: Circuit) -> Iterator[dict]:
        n = self.size(c)
        if n > self.max_states:
            raise DomainTooLarge(f"{n} initial states exceed the limit of {self.max_states}")
        axes = self.axes(c)
        base: dict = {}
        for d in c.decls:
            if d.is_array:
                fixed = self.fixed.get(d.name)
                if fixed is not None:
                    cells = tuple(fixed) + (self.fill,) * (d.length - len(fixed))
                    base[d.name] = cells[: d.length]
                else:
                    base[d.name] = (self.fill,) * d.length
        for combo in itertools.product(*(v for _, _, v in axes)):
            mu = dict(base)
            arrays: dict[str, list] = {}
            for (name, cell, _), v in zip(axes, combo):
                if cell is None:
                    mu[name] = v
                else:
                    arrays.setdefault(name, list(mu[name]))[cell] = v
            for name, cells in arrays.items():
                mu[name] = tuple(cells)
            yield {d.name: mu[d.name] for d in c.decls}

    def contains(self, c: Circuit, mu: Mapping) -> bool:
        for name, cell, vals in self.axes(c):
            v = mu[name] if cell is None else mu[name][cell]
            if v not in vals:
                return False
        for d in c.decls:
            if d.is_array and d.name not in self.fixed:
                free = min(self.free_cells.get(d.name, d.length), d.length)
                if any(v != self.fill for v in mu[d.name][free:]):
                    return False
        return True


FULL = DomainBounds()


@dataclass
class CexTrace:
    """A concrete initial valuation and the states it passes through."""

    circuit: Circuit
    initial: dict
    states: list[dict]

    @classmethod
    def simulate(cls, c: Circuit, mu: Mapping, depth: int) -> "CexTrace":
        fast = compiled(c)
        states = [dict(mu)]
        for _ in range(depth):
            states.append(fast.step(states[-1]))
        return cls(c, dict(mu), states)

    def at(self, k: int) -> dict:
        while len(self.states) <= k:
            self.states.append(compiled(self.circuit).step(self.states[-1]))
        return self.states[k]

    def satisfies(self, e: Expr, k: int = 0) -> bool:
        return compiled(self.circuit).predicate(e)(self.at(k))

    def refutes(self, f: Formula) -> bool:
        return not holds_at(self.circuit, self.initial, 0, f)

    def dump(self, names: Sequence[str] | None = None):
        """Trace of scalar registers (or ``names``) over the recorded cycles."""
        from ..simulator import TraceDump

        if names is None:
            names = [d.name for d in self.circuit.decls if not d.is_array]
        rows = tuple((k, tuple((n, s[n]) for n in names)) for k, s in enumerate(self.states))
        return TraceDump(rows, role="counterexample")


@dataclass(frozen=True)
class Valid:
    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Counterexample:
    trace: CexTrace

    def __bool__(self) -> bool:
        return False


class DecodeDrift(RuntimeError):
    """A decoded model did not reproduce the refutation under simulation."""


# --------------------------------------------------------------------------
# checkers


def _split(f: Formula) -> tuple[list[Formula], Formula]:
    if isinstance(f, Implies):
        return [f.lhs], f.rhs
    return [], f


class Checker:
    """Decides ``premises -> conclusion`` at cycle 0 over all states."""

    circuit: Circuit
    queries: int

    def check(self, premises: Sequence[Formula], conclusion: Formula) -> CexTrace | None:
        raise NotImplementedError

    def valid(self, f: Formula) -> Valid | Counterexample:
        premises, conclusion = _split(f)
        cex = self.check(premises, conclusion)
        return Valid() if cex is None else Counterexample(cex)


class ExhaustiveChecker(Checker):
    def __init__(self, c: Circuit, domain: DomainBounds = FULL):
        self.circuit = c
        self.domain = domain
        self.queries = 0
        self.fast = compiled(c)
        if domain.size(c) > domain.max_states:
            raise DomainTooLarge(f"{domain.size(c)} initial states exceed the limit of {domain.max_states}")

    def check(self, premises, conclusion):
        self.queries += 1
        fs = list(premises) + [conclusion]
        for f in fs:
            if has_always(f):
                raise ValueError("validity checks take always-free formulas")
        horizon = max(depth(f) for f in fs)
        for mu in self.domain.enumerate(self.circuit):
            states = [mu]
            for _ in range(horizon):
                states.append(self.fast.step(states[-1]))
            if all(_ev(self.fast, states, p, 0) for p in premises) and not _ev(self.fast, states, conclusion, 0):
                return CexTrace(self.circuit, dict(mu), states)
        return None


def _ev(fast, states, f: Formula, i: int) -> bool:
    if isinstance(f, Atom):
        return fast.predicate(f.expr)(states[i])
    if isinstance(f, Next):
        return _ev(fast, states, f.body, i + 1)
    if isinstance(f, BoundedFuture):
        return all(_ev(fast, states, f.body, i + j) for j in range(f.k))
    if isinstance(f, Not):
        return not _ev(fast, states, f.body, i)
    if isinstance(f, And):
        return all(_ev(fast, states, p, i) for p in f.parts)
    if isinstance(f, Or):
        return any(_ev(fast, states, p, i) for p in f.parts)
    if isinstance(f, Implies):
        return (not _ev(fast, states, f.lhs, i)) or _ev(fast, states, f.rhs, i)
    if isinstance(f, Iff):
        return _ev(fast, states, f.lhs, i) == _ev(fast, states, f.rhs, i)
    if isinstance(f, Always):
        raise ValueError("validity checks take always-free formulas")
    raise TypeError(f)


class SymbolicChecker(Checker):
    """One incremental SAT session over a growing unrolling of ``c``.

    Each formula is turned into a literal once; a query assumes its premises
    and the negated conclusion.  ``domain`` (optional) restricts the cycle-0
    state the same way the exhaustive backend enumerates it.
    """

    def __init__(
        self,
        c: Circuit,
        domain: DomainBounds | None = None,
        *,
        time_limit: float | None = None,
        conflict_limit: int | None = None,
    ):
        self.circuit = c
        self.queries = 0
        self.solver = make_solver(time_limit=time_limit, conflict_limit=conflict_limit)
        self.bb = BitBlaster(self.solver, c.width)
        self.unroll = Unrolling(c, self.bb)
        self._lits: dict = {}
        if domain is not None:
            self._restrict(domain)

    def _restrict(self, domain: DomainBounds) -> None:
        bb = self.bb
        state = self.unroll.states[0]
        c = self.circuit

        def allow(sym, vals):
            opts = []
            for v in vals:
                if v is BOT:
                    opts.append(-sym.defined)
                else:
                    opts.append(bb.and2(sym.defined, bb.equal(sym.bits, bb.bv_const(v))))
            self.solver.add_clause([bb.or_all(opts)])

        for d in c.decls:
            if d.is_array:
                cells = state[d.name]
                if d.name in domain.fixed:
                    fixed = tuple(domain.fixed[d.name]) + (domain.fill,) * d.length
                    for cell, v in zip(cells, fixed):
                        allow(cell, (v,))
                    continue
                free = min(domain.free_cells.get(d.name, d.length), d.length)
                vals = domain.choices(c, d.name)
                for k, cell in enumerate(cells):
                    allow(cell, vals if k < free else (domain.fill,))
            else:
                allow(state[d.name], domain.choices(c, d.name))

    def lit(self, f: Formula | Expr, at: int = 0) -> int:
        """Literal equivalent to ``f`` holding at cycle ``at``."""
        if isinstance(f, Expr):
            f = Atom(f)
        key = (f, at)
        hit = self._lits.get(key)
        if hit is None:
            hit = self._lits[key] = self._encode(f, at)
        return hit

    def _encode(self, f: Formula, i: int) -> int:
        bb = self.bb
        if isinstance(f, Atom):
            return bb.truthy(self.unroll.eval(f.expr, i))
        if isinstance(f, Next):
            return self.lit(f.body, i + 1)
        if isinstance(f, BoundedFuture):
            return bb.and_all([self.lit(f.body, i + j) for j in range(f.k)])
        if isinstance(f, Not):
            return -self.lit(f.body, i)
        if isinstance(f, And):
            return bb.and_all([self.lit(p, i) for p in f.parts])
        if isinstance(f, Or):
            return bb.or_all([self.lit(p, i) for p in f.parts])
        if isinstance(f, Implies):
            return bb.or2(-self.lit(f.lhs, i), self.lit(f.rhs, i))
        if isinstance(f, Iff):
            return bb.iff2(self.lit(f.lhs, i), self.lit(f.rhs, i))
        if isinstance(f, Always):
            raise ValueError("validity checks take always-free formulas")
        raise TypeError(f)

    def model_state(self) -> dict:
        return self.unroll.decode(self.solver.value, 0)

    def solve(self, lits: Sequence[int]) -> dict | None:
        """Cycle-0 valuation satisfying all ``lits``, or ``None``."""
        self.queries += 1
        if self.solver.solve(list(lits)):
            return self.model_state()
        return None

    def check(self, premises, conclusion):
        lits = [self.lit(p) for p in premises] + [-self.lit(conclusion)]
        mu = self.solve(lits)
        if mu is None:
            return None
        horizon = max(depth(f) for f in list(premises) + [conclusion])
        cex = CexTrace.simulate(self.circuit, mu, horizon)
        # the decoded model must replay to the same refutation
        ok = all(_ev(compiled(self.circuit), cex.states, p, 0) for p in premises)
        if not ok or _ev(compiled(self.circuit), cex.states, conclusion, 0):
            raise DecodeDrift("decoded counterexample does not refute the query under simulation")
        return cex


def make_checker(c: Circuit, backend: str = "symbolic", domain: DomainBounds | None = None, **kw) -> Checker:
    if backend == "symbolic":
        return SymbolicChecker(c, domain, **kw)
    if backend == "exhaustive":
        return ExhaustiveChecker(c, domain or FULL)
    raise ValueError(f"unknown backend {backend!r}")


def check_validity(
    c: Circuit,
    f: Formula,
    backend: str = "symbolic",
    domain: DomainBounds | None = None,
    **kw,
) -> Valid | Counterexample:
    """Whether ``f`` holds at cycle 0 from every state in ``domain``."""
    if has_always(f):
        raise ValueError("validity checks take always-free formulas; unroll always into F<=k")
    return make_checker(c, backend, domain, **kw).valid(f)


def unroll(c: Circuit, d: int) -> Unrolling:
    """Symbolic registers of ``c`` for cycles ``0..d`` over a fresh solver."""
    if d < 0:
        raise ValueError("depth must be non-negative")
    u = Unrolling(c, BitBlaster(make_solver(), c.width))
    u.extend_to(d)
    return u
