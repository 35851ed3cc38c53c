"""Brute-force checks over a bounded set of initial states.

These do not prove anything about unbounded behaviour.  They exist to
cross-check the symbolic verifier on circuits small enough to enumerate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from ..ir import BOT, Binary, Circuit, Const, Expr, Ref
from ..logic.validity import DomainBounds, DomainTooLarge
from ..simulator import compiled
from ..transforms import Monitor, attach

HOLDS = "Holds"
VIOLATION = "Violation"


def _pins(e: Expr | None) -> dict[str, int]:
    """Registers an initial-state predicate fixes to a constant."""
    out: dict[str, int] = {}
    if e is None:
        return out
    if isinstance(e, Binary) and e.op == "&&":
        out.update(_pins(e.lhs))
        out.update(_pins(e.rhs))
    elif isinstance(e, Binary) and e.op == "==":
        for a, b in ((e.lhs, e.rhs), (e.rhs, e.lhs)):
            if isinstance(a, Ref) and isinstance(b, Const):
                out[a.name] = b.value
    return out


def initial_bounds(c: Circuit, bounds: DomainBounds) -> DomainBounds:
    """``bounds`` with every register that ``c.init`` pins fixed to its value.

    Only conjuncts of the form ``x == const`` are used; the enumeration is
    still filtered by the full initial predicate afterwards.
    """
    fixed = dict(bounds.fixed)
    for name, v in _pins(c.init).items():
        d = c.registers.get(name)
        if d is None or d.is_array or name in fixed or name in bounds.values:
            continue
        if v >= 1 << d.width:
            continue  # unsatisfiable pin; leave it to the filter
        fixed[name] = v
    return DomainBounds(
        values=bounds.values,
        free_cells=bounds.free_cells,
        fixed=fixed,
        fill=bounds.fill,
        allow_bot=bounds.allow_bot,
        max_states=bounds.max_states,
    )


def initial_states(c: Circuit, bounds: DomainBounds) -> Iterator[dict]:
    """Initial valuations of ``c`` within ``bounds``, in enumeration order."""
    b = initial_bounds(c, bounds)
    if b.size(c) > b.max_states:
        raise DomainTooLarge(f"{b.size(c)} initial states exceed the limit of {b.max_states}")
    ok = compiled(c).predicate(c.init) if c.init is not None else (lambda mu: True)
    for mu in b.enumerate(c):
        if ok(mu):
            yield mu


@dataclass
class OracleResult:
    verdict: str
    pair: tuple[dict, dict] | None = None
    detail: str = ""
    states: int = 0
    classes: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def fields(self) -> dict:
        out = {"result": self.verdict, "initial_states": self.states, "classes": self.classes}
        if self.detail:
            out["detail"] = self.detail
        return out


class _Observer:
    """Runs a circuit with monitors attached and reads their outputs."""

    def __init__(self, c: Circuit, monitors: Sequence[Monitor | Circuit]):
        self.circuit, self.exposed = attach(c, *monitors)
        self.fast = compiled(self.circuit)
        self.readers = [self.fast.values({o: Ref(o) for o in outs}) for outs in self.exposed]

    def run(self, mu: Mapping, horizon: int) -> list[dict]:
        states = [dict(mu)]
        for _ in range(horizon - 1):
            states.append(self.fast.step(states[-1]))
        return states

    def trace(self, which: int, states: Iterable[Mapping]) -> tuple:
        read = self.readers[which]
        names = self.exposed[which]
        return tuple(tuple(read(s)[o] for o in names) for s in states)


def _key(v):
    return ("bot",) if v is BOT else v


def _freeze(mu: Mapping, names: Iterable[str]) -> tuple:
    return tuple(_key(mu[n]) if not isinstance(mu[n], tuple) else tuple(map(_key, mu[n])) for n in names)


def _indistinguishability(
    states: Iterator[dict],
    uarch: Sequence[str],
    hypothesis,
    conclusion,
) -> OracleResult:
    """Group initial states by (microarchitectural values, hypothesis trace);
    within a group every conclusion trace must be the same.

    This visits each state once instead of every pair; the first violation
    found pairs the earliest state of the group with the current one.
    """
    groups: dict = {}
    n = 0
    for mu in states:
        n += 1
        key = (_freeze(mu, uarch), hypothesis(mu))
        seen = groups.get(key)
        if seen is None:
            groups[key] = (mu, conclusion(mu))
            continue
        first, expected = seen
        got = conclusion(mu)
        if got != expected:
            at = next(i for i, (x, y) in enumerate(zip(expected, got)) if x != y)
            return OracleResult(
                VIOLATION, (first, mu), f"attacker traces differ at cycle {at}", n, len(groups)
            )
    return OracleResult(HOLDS, None, "", n, len(groups))


def oracle_leak_order(
    impl: Circuit,
    contract: Monitor | Circuit,
    attacker: Monitor | Circuit,
    uarch: Iterable[str],
    retire: Expr,
    bounds: DomainBounds,
    horizon: int,
) -> OracleResult:
    """Every pair of initial states that agrees on ``uarch`` and shows the
    same contract outputs at retirement also shows the same attacker trace,
    all within ``horizon`` cycles."""
    obs = _Observer(impl, [contract, attacker])
    retired = obs.fast.predicate(retire)
    uarch = sorted(uarch)
    last: list = [None, None]

    def states_of(mu):
        # the hypothesis and conclusion of one state share a single run
        if last[0] is not mu:
            last[:] = [mu, obs.run(mu, horizon)]
        return last[1]

    def contract_trace(mu):
        return obs.trace(0, (s for s in states_of(mu) if retired(s)))

    def attacker_trace(mu):
        return obs.trace(1, states_of(mu))

    return _indistinguishability(initial_states(impl, bounds), uarch, contract_trace, attacker_trace)


def oracle_contract_satisfaction(
    arch: Circuit,
    impl: Circuit,
    contract: Monitor | Circuit,
    attacker: Monitor | Circuit,
    uarch: Iterable[str],
    bounds: DomainBounds,
    horizon: int,
) -> OracleResult:
    """Like :func:`oracle_leak_order`, but the hypothesis compares the
    contract on the architecture, cycle by cycle and unfiltered."""
    ref = _Observer(arch, [contract])
    obs = _Observer(impl, [attacker])
    arch_names = list(arch.registers)
    uarch = sorted(uarch)

    def contract_trace(mu):
        return ref.trace(0, ref.run({n: mu[n] for n in arch_names}, horizon))

    def attacker_trace(mu):
        return obs.trace(0, obs.run(mu, horizon))

    return _indistinguishability(initial_states(impl, bounds), uarch, contract_trace, attacker_trace)


@dataclass
class ComplianceResult:
    passed: bool
    states: int = 0
    state: dict | None = None
    cycle: int | None = None
    condition: int | None = None
    detail: str = ""

    def fields(self) -> dict:
        out = {"result": "Pass" if self.passed else "Violation", "initial_states": self.states}
        if not self.passed:
            out["condition"] = self.condition
            out["cycle"] = self.cycle
            out["detail"] = self.detail
        return out


def check_isa_compliance(
    impl: Circuit,
    arch: Circuit,
    retire: Expr,
    bounds: DomainBounds,
    horizon: int,
) -> ComplianceResult:
    """Bounded test that ``impl`` implements ``arch`` with retirement ``retire``.

    For each initial state: (1) the architectural registers at retiring
    cycles, in order, match the architecture's run; (2) they never change
    into a cycle that does not retire.
    """
    names = list(arch.registers)
    missing = [n for n in names if n not in impl.registers]
    if missing:
        raise ValueError(f"{impl.name} does not declare architectural registers {', '.join(missing)}")
    fast_i, fast_a = compiled(impl), compiled(arch)
    retired = fast_i.predicate(retire)
    n = 0
    for mu in initial_states(impl, bounds):
        n += 1
        states = [mu]
        for _ in range(horizon - 1):
            states.append(fast_i.step(states[-1]))
        expected = [{k: mu[k] for k in names}]
        k = 0
        for i, s in enumerate(states):
            if i > 0 and not retired(s):
                changed = [x for x in names if s[x] != states[i - 1][x]]
                if changed:
                    return ComplianceResult(
                        False, n, mu, i, 2, f"{', '.join(changed)} changed at cycle {i} without retirement"
                    )
            if retired(s):
                while len(expected) <= k:
                    expected.append(fast_a.step(expected[-1]))
                diff = [x for x in names if s[x] != expected[k][x]]
                if diff:
                    return ComplianceResult(
                        False, n, mu, i, 1,
                        f"retirement {k} at cycle {i}: {', '.join(diff)} disagree with {arch.name} step {k}",
                    )
                k += 1
    return ComplianceResult(True, n)


__all__ = [
    "ComplianceResult",
    "HOLDS",
    "OracleResult",
    "VIOLATION",
    "check_isa_compliance",
    "initial_bounds",
    "initial_states",
    "oracle_contract_satisfaction",
    "oracle_leak_order",
]
