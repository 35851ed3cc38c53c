"""Monitors and self-composition.

A monitor is a circuit that observes another one (its *base*).  Composing it
with the base yields a circuit that runs the base unchanged and exposes the
monitor's outputs.  ``product`` runs copies side by side with copy-tagged
names; ``stuttering_product`` additionally freezes a copy that has reached a
synchronisation point while the other has not.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .ir import (
    Assignment,
    Binary,
    Circuit,
    Diagnostics,
    Expr,
    Ite,
    Ref,
    Wire,
    conj,
    neg,
    read_write_sets,
    rename,
    tag,
    validate,
)


@dataclass(frozen=True)
class Monitor:
    circuit: Circuit
    base: str

    @property
    def name(self) -> str:
        return self.circuit.name

    @property
    def outputs(self) -> tuple[str, ...]:
        return self.circuit.outputs


@dataclass(frozen=True)
class MonitorCheck:
    is_monitoring: bool
    is_combinatorial: bool
    diagnostics: Diagnostics

    def __bool__(self) -> bool:
        return self.is_monitoring


def _as_circuit(m: Monitor | Circuit) -> Circuit:
    return m.circuit if isinstance(m, Monitor) else m


def check_monitor(m: Monitor | Circuit, c: Circuit) -> MonitorCheck:
    """Decide whether ``m`` may observe ``c``, and whether it is stateless.

    ``m`` monitors ``c`` when it writes nothing ``c`` writes or reads.  It is
    combinatorial when it has no registers of its own, i.e. it only reads
    state (registers or wires) of ``c``.
    """
    mc = _as_circuit(m)
    diags = validate(mc, base=c)
    monitoring = not diags
    c_reads, c_writes = read_write_sets(c)
    m_reads, m_writes = read_write_sets(mc)
    c_vars = c_reads | c_writes

    for r in sorted(m_writes & c_writes):
        diags.error(r, f"monitor {mc.name} writes {r}, which {c.name} also writes")
        monitoring = False
    for r in sorted((m_writes & c_vars) - c_writes):
        diags.error(r, f"monitor {mc.name} writes {r}, which {c.name} reads")
        monitoring = False
    for d in mc.decls:
        if d.name in c.registers:
            diags.error(d.name, f"monitor {mc.name} redeclares register {d.name} of {c.name}")
            monitoring = False
    for w in mc.wires:
        if w.name in c.wire_map or w.name in c.registers:
            diags.error(w.name, f"monitor wire {w.name} clashes with a name of {c.name}")
            monitoring = False

    visible = c_vars | set(c.wire_map)
    foreign = sorted(m_reads - visible)
    combinatorial = monitoring and not mc.assigns and not mc.decls and not foreign
    return MonitorCheck(monitoring, combinatorial, diags)


class NotAMonitor(ValueError):
    pass


def compose(m: Monitor | Circuit, c: Circuit) -> Circuit:
    """``m[c]``: the base's assignments plus the monitor's, exposing only the
    monitor's outputs."""
    mc = _as_circuit(m)
    verdict = check_monitor(mc, c)
    if not verdict.is_monitoring:
        raise NotAMonitor(f"{mc.name} is not a monitoring circuit for {c.name}:\n{verdict.diagnostics}")
    return Circuit(
        name=f"{mc.name}_{c.name}",
        width=max(c.width, mc.width),
        decls=c.decls + mc.decls,
        wires=c.wires + mc.wires,
        assigns=c.assigns + mc.assigns,
        outputs=mc.outputs,
        init=c.init,
    )


def attach(c: Circuit, *monitors: Monitor | Circuit) -> tuple[Circuit, list[tuple[str, ...]]]:
    """Add the wires of several combinatorial monitors to ``c``.

    Unlike :func:`compose`, the base keeps its own outputs and monitor wires
    whose names clash with each other are renamed.  Returns the extended
    circuit and, per monitor, the names under which its outputs are visible.
    """
    wires = list(c.wires)
    taken = set(c.registers) | set(c.wire_map)
    exposed: list[tuple[str, ...]] = []
    for m in monitors:
        mc = _as_circuit(m)
        verdict = check_monitor(mc, c)
        if not verdict.is_combinatorial:
            raise NotAMonitor(f"{mc.name} is not a combinatorial monitor for {c.name}:\n{verdict.diagnostics}")
        mapping: dict[str, str] = {}
        for w in mc.wires:
            new = w.name
            k = 0
            while new in taken:
                k += 1
                new = f"{mc.name}_{w.name}" if k == 1 else f"{mc.name}_{w.name}_{k}"
            mapping[w.name] = new
            taken.add(new)
        for w in mc.wires:
            wires.append(Wire(mapping[w.name], rename(w.expr, mapping)))
        exposed.append(tuple(mapping.get(o, o) for o in mc.outputs))
    return replace(c, wires=tuple(wires)), exposed


# --------------------------------------------------------------------------
# self-composition


@dataclass(frozen=True)
class PairedCircuit:
    """Copy-tagged parallel composition of circuits.

    ``sync`` is the synchronisation predicate (over the untagged base) for
    stuttering products, ``None`` for plain products.
    """

    circuit: Circuit
    bases: tuple[Circuit, ...]
    sync: Expr | None = None
    copies: tuple[int, ...] = (1, 2)

    @property
    def stuttering(self) -> bool:
        return self.sync is not None

    @property
    def base(self) -> Circuit:
        return self.bases[0]

    def copy_of(self, copy: int) -> Circuit:
        return self.bases[self.copies.index(copy)]

    def tagged(self, e: Expr, copy: int) -> Expr:
        return rename(e, fn=lambda n: tag(n, copy))

    def relate(self, e: Expr, copies: tuple[int, int] = (1, 2)) -> Expr:
        """``e`` on one copy equals ``e`` on the other."""
        a, b = copies
        return Binary("==", self.tagged(e, a), self.tagged(e, b))


def _tagged_copy(c: Circuit, k: int) -> tuple[list, list, list, list]:
    t = lambda n: tag(n, k)  # noqa: E731
    decls = [replace(d, name=t(d.name)) for d in c.decls]
    wires = [Wire(t(w.name), rename(w.expr, fn=t)) for w in c.wires]
    assigns = [
        Assignment(
            t(a.target),
            rename(a.expr, fn=t),
            None if a.index is None else rename(a.index, fn=t),
            None if a.hold is None else rename(a.hold, fn=t),
        )
        for a in c.assigns
    ]
    outputs = [t(o) for o in c.outputs]
    return decls, wires, assigns, outputs


def parallel(circuits: Sequence[Circuit], copies: Sequence[int] | None = None, *, name: str | None = None) -> PairedCircuit:
    """Independent copies of ``circuits`` with names tagged by copy number."""
    copies = tuple(copies or range(1, len(circuits) + 1))
    decls, wires, assigns, outputs, inits = [], [], [], [], []
    for c, k in zip(circuits, copies):
        d, w, a, o = _tagged_copy(c, k)
        decls += d
        wires += w
        assigns += a
        outputs += o
        if c.init is not None:
            inits.append(rename(c.init, fn=lambda n, k=k: tag(n, k)))
    joined = Circuit(
        name=name or "_x_".join(c.name for c in circuits),
        width=max((c.width for c in circuits), default=8),
        decls=tuple(decls),
        wires=tuple(wires),
        assigns=tuple(assigns),
        outputs=tuple(outputs),
        init=conj(inits) if inits else None,
    )
    return PairedCircuit(joined, tuple(circuits), None, copies)


def product(c: Circuit) -> PairedCircuit:
    return parallel([c, c], name=f"{c.name}_x_{c.name}")


def stuttering_product(c: Circuit, phi: Expr) -> PairedCircuit:
    """Product of ``c`` with itself where a copy whose ``phi`` holds waits
    while the other copy's ``phi`` does not."""
    plain = product(c)
    phi1, phi2 = rename(phi, fn=lambda n: tag(n, 1)), rename(phi, fn=lambda n: tag(n, 2))
    stall = {1: Binary("&&", phi1, neg(phi2)), 2: Binary("&&", phi2, neg(phi1))}
    n = len(c.assigns)
    guarded = []
    for pos, a in enumerate(plain.circuit.assigns):
        guard = stall[1 if pos < n else 2]
        if a.index is None:
            guarded.append(replace(a, expr=Ite(guard, Ref(a.target), a.expr)))
        else:
            hold = guard if a.hold is None else Binary("||", guard, a.hold)
            guarded.append(replace(a, hold=hold))
    circuit = replace(plain.circuit, name=f"{c.name}_stutter_{c.name}", assigns=tuple(guarded))
    return PairedCircuit(circuit, (c, c), phi, (1, 2))


__all__ = [
    "Monitor",
    "MonitorCheck",
    "NotAMonitor",
    "PairedCircuit",
    "attach",
    "check_monitor",
    "compose",
    "parallel",
    "product",
    "stuttering_product",
]
