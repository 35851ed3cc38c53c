"""Relational invariant learning and the two verification procedures.

``learn_inv`` prunes a candidate pool until it is closed under the base and
inductive queries; ``verify`` runs it on the stuttering product of the
implementation and asks whether what survived pins down the attacker's view.
``verify_4way`` does the same on two architecture copies next to two
implementation copies.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

from ..ir import Circuit, conj
from ..logic.formula import And, Atom, BoundedFuture, Formula, Iff, Implies, Next, all_of
from ..logic.sat import ResourceLimit
from ..logic.validity import CexTrace, Checker, DomainBounds, make_checker
from ..transforms import NotAMonitor, PairedCircuit, attach, check_monitor, parallel, stuttering_product
from .problem import (
    AUTO_ATTACKER_EQ,
    AUTO_REG_EQ,
    AUTO_WIRE_EQ,
    CandidateInvariant,
    ProblemError,
    VerificationProblem,
    agree_on,
    dedupe,
    defined,
    generate_candidates,
    equality,
    flag_implications,
    tagged,
)

SATISFIED = "Satisfied"
NOT_PROVED = "NotProved"
COUNTEREXAMPLE = "CounterexampleFound"


class HoudiniStuck(RuntimeError):
    """A counterexample refuted the conjunction but no single candidate."""


@dataclass
class LearnResult:
    invariants: list[CandidateInvariant]
    dropped: list[tuple[CandidateInvariant, str, int]]
    base_queries: int = 0
    inductive_queries: int = 0


def learn_inv(
    paired: PairedCircuit | Circuit,
    initial: Formula,
    assumption: Formula,
    b: int,
    candidates: Sequence[CandidateInvariant],
    *,
    checker: Checker | None = None,
    backend: str = "symbolic",
    domain: DomainBounds | None = None,
    time_limit: float | None = None,
) -> LearnResult:
    """Shrink ``candidates`` to a set that holds initially and is preserved
    by every step taken while ``assumption`` holds for ``b`` cycles."""
    if b < 1:
        raise ProblemError(f"lookahead must be at least 1, got {b}")
    c = paired.circuit if isinstance(paired, PairedCircuit) else paired
    if checker is None:
        checker = make_checker(c, backend, domain, **({"time_limit": time_limit} if backend == "symbolic" else {}))
    ahead = BoundedFuture(b, assumption)
    result = LearnResult(list(candidates), [])

    def prune(cex: CexTrace, at: int, phase: str, query: int) -> None:
        keep = []
        for cand in result.invariants:
            if cex.satisfies(cand.expr, at):
                keep.append(cand)
            else:
                result.dropped.append((cand, phase, query))
        if len(keep) == len(result.invariants):
            raise HoudiniStuck(f"{phase} counterexample falsifies no individual candidate")
        result.invariants = keep

    while True:
        result.base_queries += 1
        cex = checker.check([initial, ahead], _conj(result.invariants))
        if cex is None:
            break
        prune(cex, 0, "base", result.base_queries)
    if not result.invariants:
        return result
    while True:
        result.inductive_queries += 1
        now = _conj(result.invariants)
        cex = checker.check([now, ahead], Next(now))
        if cex is None:
            break
        prune(cex, 1, "inductive", result.inductive_queries)
    return result


def _conj(cands: Sequence[CandidateInvariant]) -> Formula:
    return Atom(conj(cand.expr for cand in cands))


@dataclass
class VerificationReport:
    verdict: str
    reason: str = ""
    invariants: list[CandidateInvariant] = field(default_factory=list)
    dropped: list[tuple[CandidateInvariant, str, int]] = field(default_factory=list)
    candidates: int = 0
    iterations_base: int = 0
    iterations_inductive: int = 0
    solver_queries: int = 0
    lookahead: int = 1
    engine: str = "stuttering"
    cex: CexTrace | None = None
    resource_limited: bool = False
    elapsed: float = 0.0

    @property
    def satisfied(self) -> bool:
        return self.verdict == SATISFIED

    def fields(self, *, timing: bool = False) -> dict:
        out = {
            "result": self.verdict,
            "engine": self.engine,
            "lookahead": self.lookahead,
            "candidates": self.candidates,
            "invariants_learned": len(self.invariants),
            "iterations_base": self.iterations_base,
            "iterations_inductive": self.iterations_inductive,
            "solver_queries": self.solver_queries,
        }
        if self.reason:
            out["reason"] = self.reason
        if timing:
            out["elapsed_secs"] = f"{self.elapsed:.3f}"
        return out


def _run(
    c: Circuit,
    engine: str,
    b: int,
    initial: Formula,
    assumption: Formula,
    goal: Formula,
    candidates: list[CandidateInvariant],
    backend: str,
    domain: DomainBounds | None,
    time_limit: float | None,
) -> VerificationReport:
    t0 = time.perf_counter()
    report = VerificationReport(NOT_PROVED, lookahead=b, engine=engine, candidates=len(candidates))
    kw = {"time_limit": time_limit} if backend == "symbolic" else {}
    checker = make_checker(c, backend, domain, **kw)
    try:
        learned = learn_inv(c, initial, assumption, b, candidates, checker=checker)
        report.invariants = learned.invariants
        report.dropped = learned.dropped
        report.iterations_base = learned.base_queries
        report.iterations_inductive = learned.inductive_queries
        cex = checker.check([_conj(learned.invariants)], goal)
        if cex is None:
            report.verdict = SATISFIED
        else:
            report.reason = "learned invariants do not imply attacker agreement"
            report.cex = cex
    except ResourceLimit as err:
        report.reason = f"solver resource limit: {err}"
        report.resource_limited = True
    report.solver_queries = checker.queries
    report.elapsed = time.perf_counter() - t0
    return report


def verify(
    p: VerificationProblem,
    *,
    backend: str = "symbolic",
    domain: DomainBounds | None = None,
    time_limit: float | None = None,
) -> VerificationReport:
    """Try to prove that the attacker learns nothing the contract does not
    reveal at retirement, using the stuttering product of ``p.impl``."""
    p.validate()
    c, lo, ao = p.instrumented()
    sp = stuttering_product(c, p.retire)
    phi1, phi2 = tagged(p.retire, 1), tagged(p.retire, 2)
    parts: list[Formula] = []
    if c.init is not None:
        parts += [Atom(tagged(c.init, 1)), Atom(tagged(c.init, 2))]
    regs = [d.name for d in p.impl.decls]
    parts += [Atom(defined(c, regs, 1)), Atom(defined(c, regs, 2))]
    parts.append(Atom(agree_on(c, sorted(p.uarch), 1, 2)))
    initial = all_of(parts)
    both_retire = And((Atom(phi1), Atom(phi2)))
    assumption = Implies(both_retire, Atom(agree_on(c, lo, 1, 2)))
    goal = And((Atom(agree_on(c, ao, 1, 2)), Iff(Atom(phi1), Atom(phi2))))
    report = _run(
        sp.circuit, "stuttering", p.b, initial, assumption, goal,
        generate_candidates(p), backend, domain, time_limit,
    )
    return report


def candidates_4way(arch: Circuit, p: VerificationProblem, impl: Circuit, atk: Sequence[str]) -> list[CandidateInvariant]:
    """Equalities for the four-copy product.

    Copies 1, 2 run the architecture and 3, 4 the implementation.  Besides
    same-role equalities, architectural registers are related across roles
    (1 with 3, 2 with 4) since they start out equal there.
    """
    out: list[CandidateInvariant] = []
    if p.auto_candidates:
        for d in arch.decls:
            out.append(equality(arch, d.name, 1, 2, AUTO_REG_EQ))
        for d in p.impl.decls:
            out.append(equality(impl, d.name, 3, 4, AUTO_REG_EQ))
        for d in arch.decls:
            out.append(equality(arch, d.name, 1, 3, AUTO_REG_EQ))
            out.append(equality(arch, d.name, 2, 4, AUTO_REG_EQ))
        for w in p.impl.wires:
            out.append(equality(impl, w.name, 3, 4, AUTO_WIRE_EQ))
        for o in atk:
            out.append(equality(impl, o, 3, 4, AUTO_ATTACKER_EQ))
        out.extend(flag_implications(p.impl, (3, 4)))
    out.extend(p.user_candidates)
    return dedupe(out)


def verify_4way(
    arch: Circuit,
    p: VerificationProblem,
    *,
    backend: str = "symbolic",
    domain: DomainBounds | None = None,
    time_limit: float | None = None,
) -> VerificationReport:
    """Prove contract satisfaction against the architecture directly, on
    the product arch x arch x impl x impl."""
    p.validate()
    if set(arch.registers) != set(p.arch_registers):
        raise ProblemError(
            f"architecture {arch.name} declares {sorted(arch.registers)} "
            f"but the architectural registers of {p.impl.name} are {sorted(p.arch_registers)}"
        )
    verdict = check_monitor(p.contract, arch)
    if not verdict.is_combinatorial:
        raise NotAMonitor(f"contract {p.contract.name} is not a combinatorial monitor for {arch.name}")
    arch_m, (lo,) = attach(arch, p.contract)
    impl_m, (ao,) = attach(p.impl, p.attacker)
    q = parallel([arch_m, arch_m, impl_m, impl_m], name=f"{arch.name}x2_{p.impl.name}x2")
    archs = [d.name for d in arch.decls]
    parts: list[Formula] = []
    if q.circuit.init is not None:
        parts.append(Atom(q.circuit.init))
    regs = [d.name for d in p.impl.decls]
    parts += [Atom(defined(impl_m, regs, 3)), Atom(defined(impl_m, regs, 4))]
    parts += [
        Atom(agree_on(arch, archs, 1, 3)),
        Atom(agree_on(arch, archs, 2, 4)),
        Atom(agree_on(p.impl, sorted(p.uarch), 3, 4)),
    ]
    initial = all_of(parts)
    assumption = Atom(agree_on(arch_m, lo, 1, 2))
    goal = Atom(agree_on(impl_m, ao, 3, 4))
    return _run(
        q.circuit, "4way", p.b, initial, assumption, goal,
        candidates_4way(arch, p, impl_m, ao), backend, domain, time_limit,
    )


__all__ = [
    "COUNTEREXAMPLE",
    "HoudiniStuck",
    "LearnResult",
    "NOT_PROVED",
    "SATISFIED",
    "VerificationReport",
    "candidates_4way",
    "learn_inv",
    "verify",
    "verify_4way",
]
