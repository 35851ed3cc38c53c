"""Verification problems and relational candidate invariants."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..ir import (
    ArrayRead,
    Binary,
    Circuit,
    Const,
    Expr,
    Ite,
    Ref,
    conj,
    iff,
    rename,
    tag,
    vars_of,
)
from ..transforms import Monitor, NotAMonitor, attach, check_monitor


class ProblemError(ValueError):
    """A verification problem violates a precondition."""


AUTO_REG_EQ = "AutoRegEq"
AUTO_WIRE_EQ = "AutoWireEq"
AUTO_ATTACKER_EQ = "AutoAttackerEq"
AUTO_RET_SYNC = "AutoRetSync"
AUTO_FLAG_IMPL = "AutoFlagImpl"
USER = "User"


@dataclass(frozen=True)
class CandidateInvariant:
    """A predicate over a copy-tagged circuit, plus where it came from.

    ``subject`` is the register, wire or output the candidate was generated
    for, or the user's label.
    """

    expr: Expr
    provenance: str
    subject: str = ""
    text: str = ""

    @property
    def label(self) -> str:
        if self.text:
            return self.text
        from ..textio import print_expr

        return print_expr(self.expr)

    def __str__(self) -> str:
        return self.label


def tagged(e: Expr, k: int) -> Expr:
    return rename(e, fn=lambda n: tag(n, k))


def same_value(c: Circuit, name: str, a: int, b: int) -> Expr:
    """``name`` holds the same value on copies ``a`` and ``b``.

    Arrays are compared cell by cell over their declared length.
    """
    d = c.registers.get(name)
    if d is not None and d.is_array:
        return conj(
            Binary("==", ArrayRead(tag(name, a), Const(k)), ArrayRead(tag(name, b), Const(k)))
            for k in range(d.length)
        )
    return Binary("==", Ref(tag(name, a)), Ref(tag(name, b)))


def equality(c: Circuit, name: str, a: int, b: int, provenance: str) -> CandidateInvariant:
    """Candidate ``name`` on copy ``a`` equals ``name`` on copy ``b``."""
    return CandidateInvariant(same_value(c, name, a, b), provenance, name, f"{tag(name, a)} == {tag(name, b)}")


def defined(c: Circuit, names: Iterable[str], k: int) -> Expr:
    """Every listed register of copy ``k`` holds a value (not bottom).

    ``x == x`` is false exactly when ``x`` is bottom.
    """
    return conj(same_value(c, n, k, k) for n in names)


def flag_implications(c: Circuit, copies: Sequence[int]) -> list[CandidateInvariant]:
    """``x.k == a ? y.k == b : 1`` for every ordered pair of one-bit
    registers and every ``a``, ``b``, on each listed copy.

    Control flags of a pipeline are usually tied together this way, and
    such single-copy facts are often what makes the cross-copy equalities
    inductive.  The ternary keeps the candidate defined when the guard is
    false even if ``y`` is not.
    """
    flags = [d.name for d in c.decls if not d.is_array and d.width == 1]
    out = []
    for k in copies:
        for x in flags:
            for y in flags:
                if x == y:
                    continue
                for a in (0, 1):
                    for b in (0, 1):
                        guard = Binary("==", Ref(tag(x, k)), Const(a))
                        body = Binary("==", Ref(tag(y, k)), Const(b))
                        out.append(
                            CandidateInvariant(
                                Ite(guard, body, Const(1)), AUTO_FLAG_IMPL, f"{x},{y}",
                                f"{tag(x, k)} == {a} ? {tag(y, k)} == {b} : 1",
                            )
                        )
    return out


def agree_on(c: Circuit, names: Iterable[str], a: int, b: int) -> Expr:
    return conj(same_value(c, n, a, b) for n in names)


@dataclass
class VerificationProblem:
    impl: Circuit
    contract: Monitor
    attacker: Monitor
    retire: Expr
    b: int = 1
    uarch: frozenset[str] = frozenset()
    user_candidates: Sequence[CandidateInvariant] = ()
    auto_candidates: bool = True
    _instrumented: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def arch_registers(self) -> list[str]:
        return [d.name for d in self.impl.decls if d.name not in self.uarch]

    def validate(self) -> None:
        if self.b < 1:
            raise ProblemError(f"lookahead must be at least 1, got {self.b}")
        unknown = sorted(set(self.uarch) - set(self.impl.registers))
        if unknown:
            raise ProblemError(f"microarchitectural set names undeclared registers: {', '.join(unknown)}")
        for role, m in (("contract", self.contract), ("attacker", self.attacker)):
            verdict = check_monitor(m, self.impl)
            if not verdict.is_combinatorial:
                detail = str(verdict.diagnostics) or "it has registers or assignments of its own"
                raise NotAMonitor(f"{role} {m.name} is not a combinatorial monitor for {self.impl.name}: {detail}")
        from ..ir import referenced_names

        visible = set(vars_of(self.impl)) | set(self.impl.wire_map)
        stray = sorted(referenced_names(self.retire) - visible)
        if stray:
            raise ProblemError(f"retirement predicate reads unknown names: {', '.join(stray)}")

    def instrumented(self) -> tuple[Circuit, tuple[str, ...], tuple[str, ...]]:
        """``impl`` with both monitors' wires added, and the names of the
        contract and attacker outputs in it."""
        if self._instrumented is None:
            c, (lo, ao) = attach(self.impl, self.contract, self.attacker)
            self._instrumented = (c, lo, ao)
        return self._instrumented


def generate_candidates(p: VerificationProblem) -> list[CandidateInvariant]:
    """Equalities across the two copies, retirement sync, flag implications,
    then user candidates.

    Order is deterministic: registers in declaration order, the
    implementation's wires, attacker outputs, the retirement sync, one-bit
    flag implications on each copy, then user candidates.  Duplicate predicates keep their first provenance.
    """
    c, _, atk = p.instrumented()
    out: list[CandidateInvariant] = []
    if p.auto_candidates:
        for d in p.impl.decls:
            out.append(equality(c, d.name, 1, 2, AUTO_REG_EQ))
        for w in p.impl.wires:
            out.append(equality(c, w.name, 1, 2, AUTO_WIRE_EQ))
        for o in atk:
            out.append(equality(c, o, 1, 2, AUTO_ATTACKER_EQ))
        out.append(CandidateInvariant(iff(tagged(p.retire, 1), tagged(p.retire, 2)), AUTO_RET_SYNC))
        out.extend(flag_implications(p.impl, (1, 2)))
    out.extend(p.user_candidates)
    return dedupe(out)


def dedupe(cands: Iterable[CandidateInvariant]) -> list[CandidateInvariant]:
    seen: set = set()
    out = []
    for cand in cands:
        if cand.expr not in seen:
            seen.add(cand.expr)
            out.append(cand)
    return out


def parse_candidates(text: str, over: Circuit | None = None, source: str = "<candidates>") -> list[CandidateInvariant]:
    """One candidate per line, ``label: expression`` or a bare expression.

    Blank lines and lines starting with ``#`` or ``//`` are skipped.
    """
    from ..textio import ParseError, parse_expr

    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("//"):
            continue
        label, sep, body = line.partition(":")
        # a ternary's ':' never precedes a bare identifier label, so only
        # treat the prefix as a label when it is a plain word
        if not sep or not label.strip().replace("_", "").replace("-", "").isalnum():
            label, body = "", line
        try:
            e = parse_expr(body.strip(), over, source=f"{source}:{lineno}")
        except ParseError as err:
            raise ParseError(err.message, lineno, err.col, source) from None
        out.append(CandidateInvariant(e, USER, label.strip() or body.strip(), label.strip()))
    return out
